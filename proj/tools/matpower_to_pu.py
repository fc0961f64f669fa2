#!/usr/bin/env python3
"""Flatten a MATPOWER v2 case whose branch data is in Ohms and loads in kVA
(e.g. case141.m) into plain numeric matrices: loads in MW/MVAr, r/x in p.u.

usage: matpower_to_pu.py case141.m [power_factor] > data/cases/case141.m
"""
import math
import re
import sys


def matrix(text, name):
    body = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S).group(1)
    rows = []
    for line in body.split("\n"):
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def main():
    text = open(sys.argv[1]).read()
    pf = float(sys.argv[2]) if len(sys.argv) > 2 else 0.85
    base_mva = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    bus = matrix(text, "bus")
    branch = matrix(text, "branch")
    vbase = bus[0][9] * 1e3
    zbase = vbase**2 / (base_mva * 1e6)
    out = sys.stdout
    out.write("function mpc = case141\n")
    out.write("%% 141-bus radial feeder (MATPOWER case141, BSD-3-Clause).\n")
    out.write("%% Flattened: loads converted kVA -> MW/MVAr at pf %.2f, r/x Ohm -> p.u.\n" % pf)
    out.write("mpc.version = '2';\n")
    out.write("mpc.baseMVA = %s;\n\n" % repr(base_mva))
    out.write("%%\tbus_i\ttype\tPd\tQd\n")
    out.write("mpc.bus = [\n")
    for r in bus:
        s_mva = r[2] / 1e3
        pd = s_mva * pf
        qd = s_mva * math.sin(math.acos(pf))
        out.write("\t%d\t%d\t%.17g\t%.17g;\n" % (r[0], r[1], pd, qd))
    out.write("];\n\n")
    out.write("%%\tfbus\ttbus\tr\tx\n")
    out.write("mpc.branch = [\n")
    for r in branch:
        out.write("\t%d\t%d\t%.17g\t%.17g;\n" % (r[0], r[1], r[2] / zbase, r[3] / zbase))
    out.write("];\n")


if __name__ == "__main__":
    main()
