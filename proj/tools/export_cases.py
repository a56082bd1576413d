#!/usr/bin/env python3
"""Regenerates the bundled case fixtures under data/cases/.

Branch data for the IEEE 6-bus (Wood & Wollenberg) and IEEE 39-bus (New
England) systems was copied from the MATPOWER case files case6ww.m and
case39.m. Line susceptance is taken as x / (r^2 + x^2), the magnitude of the
imaginary part of the series admittance. Parallel branches are summed.

The run is deterministic, so the checked-in fixtures are byte-stable.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "cases"

# (from, to, r, x)
CASE6WW_BRANCHES = [
    (1, 2, 0.10, 0.20), (1, 4, 0.05, 0.20), (1, 5, 0.08, 0.30),
    (2, 3, 0.05, 0.25), (2, 4, 0.05, 0.10), (2, 5, 0.10, 0.30),
    (2, 6, 0.07, 0.20), (3, 5, 0.12, 0.26), (3, 6, 0.02, 0.10),
    (4, 5, 0.20, 0.40), (5, 6, 0.10, 0.30),
]

CASE39_BRANCHES = [
    (1, 2, 0.0035, 0.0411), (1, 39, 0.0010, 0.0250), (2, 3, 0.0013, 0.0151),
    (2, 25, 0.0070, 0.0086), (2, 30, 0.0000, 0.0181), (3, 4, 0.0013, 0.0213),
    (3, 18, 0.0011, 0.0133), (4, 5, 0.0008, 0.0128), (4, 14, 0.0008, 0.0129),
    (5, 6, 0.0002, 0.0026), (5, 8, 0.0008, 0.0112), (6, 7, 0.0006, 0.0092),
    (6, 11, 0.0007, 0.0082), (6, 31, 0.0000, 0.0250), (7, 8, 0.0004, 0.0046),
    (8, 9, 0.0023, 0.0363), (9, 39, 0.0010, 0.0250), (10, 11, 0.0004, 0.0043),
    (10, 13, 0.0004, 0.0043), (10, 32, 0.0000, 0.0200), (12, 11, 0.0016, 0.0435),
    (12, 13, 0.0016, 0.0435), (13, 14, 0.0009, 0.0101), (14, 15, 0.0018, 0.0217),
    (15, 16, 0.0009, 0.0094), (16, 17, 0.0007, 0.0089), (16, 19, 0.0016, 0.0195),
    (16, 21, 0.0008, 0.0135), (16, 24, 0.0003, 0.0059), (17, 18, 0.0007, 0.0082),
    (17, 27, 0.0013, 0.0173), (19, 20, 0.0007, 0.0138), (19, 33, 0.0007, 0.0142),
    (20, 34, 0.0009, 0.0180), (21, 22, 0.0008, 0.0140), (22, 23, 0.0006, 0.0096),
    (22, 35, 0.0000, 0.0143), (23, 24, 0.0022, 0.0350), (23, 36, 0.0005, 0.0272),
    (25, 26, 0.0032, 0.0323), (25, 37, 0.0006, 0.0232), (26, 27, 0.0014, 0.0147),
    (26, 28, 0.0043, 0.0474), (26, 29, 0.0057, 0.0625), (28, 29, 0.0014, 0.0151),
    (29, 38, 0.0008, 0.0156),
]

# Uniform coupling for the 4-bus benchmark; every pair of buses is connected.
CASE4_COUPLING = 0.1

SYSTEMS_4BUS = {
    "A": {"M": [0.3, 0.2], "D": [0.15, 0.3, 0.25, 0.25]},
    "B": {"M": [0.02, 0.03], "D": [0.015, 0.015, 0.02, 0.04]},
    "C": {"M": [5.2, 4.0], "D": [3.8, 4.3, 10.5, 8.3]},
}


def susceptance_matrix(n, branches):
    b = [[0.0] * n for _ in range(n)]
    for f, t, r, x in branches:
        y = x / (r * r + x * x)
        b[f - 1][t - 1] += y
        b[t - 1][f - 1] += y
    return b


def write(name, case):
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / name
    path.write_text(json.dumps(case, indent=2) + "\n")
    print(f"wrote {path}")


def case4(system):
    n = 4
    b = [[0.0 if i == j else CASE4_COUPLING for j in range(n)] for i in range(n)]
    p = SYSTEMS_4BUS[system]
    return {
        "name": f"4-bus 2-generator, system {system}",
        "n_buses": n,
        "generators": [1, 2],
        "loads": [3, 4],
        "susceptance": b,
        "p_mech": {"1": 0.1, "2": 0.2},
        "p_load": {"3": 0.1, "4": 0.2},
        "true_params": {
            "M": {"1": p["M"][0], "2": p["M"][1]},
            "D": {str(i + 1): d for i, d in enumerate(p["D"])},
        },
    }


def case6():
    n = 6
    return {
        "name": "IEEE 6-bus (Wood & Wollenberg)",
        "note": "mechanical input at generator 3 is not given for this system; set to 0",
        "n_buses": n,
        "generators": [1, 2, 3],
        "loads": [4, 5, 6],
        "susceptance": susceptance_matrix(n, CASE6WW_BRANCHES),
        "p_mech": {"1": 0.2, "2": 0.1, "3": 0.0},
        "p_load": {"4": 0.1, "5": 0.2, "6": 0.0},
        "true_params": {
            "M": {"1": 1.25, "2": 0.34, "3": 0.16},
            "D": {"1": 1.25, "2": 0.68, "3": 0.32, "4": 1.0, "5": 1.0, "6": 1.0},
        },
    }


def case39():
    n = 39
    gens = list(range(30, 40))
    loads = list(range(1, 30))
    inertia = [2.3186] + [2.6419] * 7 + [2.4862] * 2
    return {
        "name": "IEEE 39-bus (New England)",
        "n_buses": n,
        "generators": gens,
        "loads": loads,
        "susceptance": susceptance_matrix(n, CASE39_BRANCHES),
        "p_mech": {str(g): (0.2 if g == 33 else 0.0) for g in gens},
        "p_load": {str(l): (0.2 if l == 19 else 0.0) for l in loads},
        "true_params": {
            "M": {str(g): m for g, m in zip(gens, inertia)},
            "D": {**{str(g): 2.0 for g in gens}, **{str(l): 0.1 for l in loads}},
        },
    }


if __name__ == "__main__":
    for s in "ABC":
        write(f"case4_sys{s}.json", case4(s))
    write("case6ww.json", case6())
    write("case39.json", case39())
