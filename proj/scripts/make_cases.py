#!/usr/bin/env python3
"""Generate the shipped grid case files from the standard IEEE test-system tables.

Source data: the widely distributed IEEE 14-bus and 118-bus test cases
(topology, series impedances, solved operating point as found in the common
MATPOWER/PYPOWER distributions). The case schema used by this project keeps
only what the tools need: bus operating voltages/angles, line series
impedance, line status, and the sensor list.

Conversions applied (see cases/README.md):
  * parallel branches are merged into one equivalent line (1/Z = 1/Z1 + 1/Z2)
    so that per-direction flow sensors are unique per line;
  * transformer taps, line charging and shunts are dropped;
  * source angles are rounded to 0.01 deg; where that makes the operating
    real-power flow of a connected line exactly zero, the higher-numbered
    endpoint's angle is nudged by +0.01 deg (repeated until all sensor
    readings are nonzero) so downstream sanity checks have no degenerate rows.

Run from the repo root:  python3 scripts/make_cases.py
"""

import cmath
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
CASES = os.path.join(HERE, os.pardir, "cases")

# ---------------------------------------------------------------- IEEE 14-bus
# bus: (id, Vm [p.u.], Va [deg])
BUS14 = [
    (1, 1.060, 0.00), (2, 1.045, -4.98), (3, 1.010, -12.72),
    (4, 1.019, -10.33), (5, 1.020, -8.78), (6, 1.070, -14.22),
    (7, 1.062, -13.37), (8, 1.090, -13.36), (9, 1.056, -14.94),
    (10, 1.051, -15.10), (11, 1.057, -14.79), (12, 1.055, -15.07),
    (13, 1.050, -15.16), (14, 1.036, -16.04),
]
# branch: (from, to, R, X)
BRANCH14 = [
    (1, 2, 0.01938, 0.05917), (1, 5, 0.05403, 0.22304),
    (2, 3, 0.04699, 0.19797), (2, 4, 0.05811, 0.17632),
    (2, 5, 0.05695, 0.17388), (3, 4, 0.06701, 0.17103),
    (4, 5, 0.01335, 0.04211), (4, 7, 0.0, 0.20912),
    (4, 9, 0.0, 0.55618), (5, 6, 0.0, 0.25202),
    (6, 11, 0.09498, 0.19890), (6, 12, 0.12291, 0.25581),
    (6, 13, 0.06615, 0.13027), (7, 8, 0.0, 0.17615),
    (7, 9, 0.0, 0.11001), (9, 10, 0.03181, 0.08450),
    (9, 14, 0.12711, 0.27038), (10, 11, 0.08205, 0.19207),
    (12, 13, 0.22092, 0.19988), (13, 14, 0.17093, 0.34802),
]
REF14 = 1

# --------------------------------------------------------------- IEEE 118-bus
BUS118 = [
    (1, 0.955, 10.67), (2, 0.971, 11.22), (3, 0.968, 11.56),
    (4, 0.998, 15.28), (5, 1.002, 15.73), (6, 0.990, 13.00),
    (7, 0.989, 12.56), (8, 1.015, 20.77), (9, 1.043, 28.02),
    (10, 1.050, 35.61), (11, 0.985, 12.72), (12, 0.990, 12.20),
    (13, 0.968, 11.35), (14, 0.984, 11.50), (15, 0.970, 11.23),
    (16, 0.984, 11.91), (17, 0.995, 13.74), (18, 0.973, 11.53),
    (19, 0.963, 11.05), (20, 0.958, 11.93), (21, 0.959, 13.52),
    (22, 0.970, 16.08), (23, 1.000, 21.00), (24, 0.992, 20.89),
    (25, 1.050, 27.93), (26, 1.015, 29.71), (27, 0.968, 15.35),
    (28, 0.962, 13.62), (29, 0.963, 12.63), (30, 0.986, 18.79),
    (31, 0.967, 12.75), (32, 0.964, 14.80), (33, 0.972, 10.63),
    (34, 0.986, 11.30), (35, 0.981, 10.87), (36, 0.980, 10.87),
    (37, 0.992, 11.77), (38, 0.962, 16.91), (39, 0.970, 8.41),
    (40, 0.970, 7.35), (41, 0.967, 6.92), (42, 0.985, 8.53),
    (43, 0.978, 11.28), (44, 0.985, 13.82), (45, 0.987, 15.67),
    (46, 1.005, 18.49), (47, 1.017, 20.73), (48, 1.021, 19.93),
    (49, 1.025, 20.94), (50, 1.001, 18.90), (51, 0.967, 16.28),
    (52, 0.957, 15.32), (53, 0.946, 14.35), (54, 0.955, 15.26),
    (55, 0.952, 14.97), (56, 0.954, 15.16), (57, 0.971, 16.36),
    (58, 0.959, 15.51), (59, 0.985, 19.37), (60, 0.993, 23.15),
    (61, 0.995, 24.04), (62, 0.998, 23.43), (63, 0.969, 22.75),
    (64, 0.984, 24.52), (65, 1.005, 27.65), (66, 1.050, 27.48),
    (67, 1.020, 24.84), (68, 1.003, 27.55), (69, 1.035, 30.00),
    (70, 0.984, 22.58), (71, 0.987, 22.15), (72, 0.980, 20.98),
    (73, 0.991, 21.94), (74, 0.958, 21.64), (75, 0.967, 22.91),
    (76, 0.943, 21.77), (77, 1.006, 26.72), (78, 1.003, 26.42),
    (79, 1.009, 26.72), (80, 1.040, 28.96), (81, 0.997, 28.10),
    (82, 0.989, 27.24), (83, 0.985, 28.42), (84, 0.980, 30.95),
    (85, 0.985, 32.51), (86, 0.987, 31.14), (87, 1.015, 31.40),
    (88, 0.987, 35.64), (89, 1.005, 39.69), (90, 0.985, 33.29),
    (91, 0.980, 33.31), (92, 0.993, 33.80), (93, 0.987, 30.79),
    (94, 0.991, 28.64), (95, 0.981, 27.67), (96, 0.993, 27.51),
    (97, 1.011, 27.88), (98, 1.024, 27.40), (99, 1.010, 27.04),
    (100, 1.017, 28.03), (101, 0.993, 29.61), (102, 0.991, 32.30),
    (103, 1.001, 24.44), (104, 0.971, 21.69), (105, 0.965, 20.57),
    (106, 0.962, 20.35), (107, 0.952, 17.53), (108, 0.967, 19.38),
    (109, 0.967, 18.93), (110, 0.973, 18.09), (111, 0.980, 19.74),
    (112, 0.975, 14.99), (113, 0.993, 13.74), (114, 0.960, 14.46),
    (115, 0.960, 14.46), (116, 1.005, 27.12), (117, 0.974, 10.67),
    (118, 0.949, 21.92),
]
BRANCH118 = [
    (1, 2, 0.0303, 0.0999), (1, 3, 0.0129, 0.0424),
    (4, 5, 0.00176, 0.00798), (3, 5, 0.0241, 0.108),
    (5, 6, 0.0119, 0.054), (6, 7, 0.00459, 0.0208),
    (8, 9, 0.00244, 0.0305), (8, 5, 0.0, 0.0267),
    (9, 10, 0.00258, 0.0322), (4, 11, 0.0209, 0.0688),
    (5, 11, 0.0203, 0.0682), (11, 12, 0.00595, 0.0196),
    (2, 12, 0.0187, 0.0616), (3, 12, 0.0484, 0.16),
    (7, 12, 0.00862, 0.034), (11, 13, 0.02225, 0.0731),
    (12, 14, 0.0215, 0.0707), (13, 15, 0.0744, 0.2444),
    (14, 15, 0.0595, 0.195), (12, 16, 0.0212, 0.0834),
    (15, 17, 0.0132, 0.0437), (16, 17, 0.0454, 0.1801),
    (17, 18, 0.0123, 0.0505), (18, 19, 0.01119, 0.0493),
    (19, 20, 0.0252, 0.117), (15, 19, 0.012, 0.0394),
    (20, 21, 0.0183, 0.0849), (21, 22, 0.0209, 0.097),
    (22, 23, 0.0342, 0.159), (23, 24, 0.0135, 0.0492),
    (23, 25, 0.0156, 0.08), (26, 25, 0.0, 0.0382),
    (25, 27, 0.0318, 0.163), (27, 28, 0.01913, 0.0855),
    (28, 29, 0.0237, 0.0943), (30, 17, 0.0, 0.0388),
    (8, 30, 0.00431, 0.0504), (26, 30, 0.00799, 0.086),
    (17, 31, 0.0474, 0.1563), (29, 31, 0.0108, 0.0331),
    (23, 32, 0.0317, 0.1153), (31, 32, 0.0298, 0.0985),
    (27, 32, 0.0229, 0.0755), (15, 33, 0.038, 0.1244),
    (19, 34, 0.0752, 0.247), (35, 36, 0.00224, 0.0102),
    (35, 37, 0.011, 0.0497), (33, 37, 0.0415, 0.142),
    (34, 36, 0.00871, 0.0268), (34, 37, 0.00256, 0.0094),
    (38, 37, 0.0, 0.0375), (37, 39, 0.0321, 0.106),
    (37, 40, 0.0593, 0.168), (30, 38, 0.00464, 0.054),
    (39, 40, 0.0184, 0.0605), (40, 41, 0.0145, 0.0487),
    (40, 42, 0.0555, 0.183), (41, 42, 0.041, 0.135),
    (43, 44, 0.0608, 0.2454), (34, 43, 0.0413, 0.1681),
    (44, 45, 0.0224, 0.0901), (45, 46, 0.04, 0.1356),
    (46, 47, 0.038, 0.127), (46, 48, 0.0601, 0.189),
    (47, 49, 0.0191, 0.0625), (42, 49, 0.0715, 0.323),
    (42, 49, 0.0715, 0.323), (45, 49, 0.0684, 0.186),
    (48, 49, 0.0179, 0.0505), (49, 50, 0.0267, 0.0752),
    (49, 51, 0.0486, 0.137), (51, 52, 0.0203, 0.0588),
    (52, 53, 0.0405, 0.1635), (53, 54, 0.0263, 0.122),
    (49, 54, 0.073, 0.289), (49, 54, 0.0869, 0.291),
    (54, 55, 0.0169, 0.0707), (54, 56, 0.00275, 0.00955),
    (55, 56, 0.00488, 0.0151), (56, 57, 0.0343, 0.0966),
    (50, 57, 0.0474, 0.134), (56, 58, 0.0343, 0.0966),
    (51, 58, 0.0255, 0.0719), (54, 59, 0.0503, 0.2293),
    (56, 59, 0.0825, 0.251), (56, 59, 0.0803, 0.239),
    (55, 59, 0.04739, 0.2158), (59, 60, 0.0317, 0.145),
    (59, 61, 0.0328, 0.15), (60, 61, 0.00264, 0.0135),
    (60, 62, 0.0123, 0.0561), (61, 62, 0.00824, 0.0376),
    (63, 59, 0.0, 0.0386), (63, 64, 0.00172, 0.02),
    (64, 61, 0.0, 0.0268), (38, 65, 0.00901, 0.0986),
    (64, 65, 0.00269, 0.0302), (49, 66, 0.018, 0.0919),
    (49, 66, 0.018, 0.0919), (62, 66, 0.0482, 0.218),
    (62, 67, 0.0258, 0.117), (65, 66, 0.0, 0.037),
    (66, 67, 0.0224, 0.1015), (65, 68, 0.00138, 0.016),
    (47, 69, 0.0844, 0.2778), (49, 69, 0.0985, 0.324),
    (68, 69, 0.0, 0.037), (69, 70, 0.03, 0.127),
    (24, 70, 0.00221, 0.4115), (70, 71, 0.00882, 0.0355),
    (24, 72, 0.0488, 0.196), (71, 72, 0.0446, 0.18),
    (71, 73, 0.00866, 0.0454), (70, 74, 0.0401, 0.1323),
    (70, 75, 0.0428, 0.141), (69, 75, 0.0405, 0.122),
    (74, 75, 0.0123, 0.0406), (76, 77, 0.0444, 0.148),
    (69, 77, 0.0309, 0.101), (75, 77, 0.0601, 0.1999),
    (77, 78, 0.00376, 0.0124), (78, 79, 0.00546, 0.0244),
    (77, 80, 0.017, 0.0485), (77, 80, 0.0294, 0.105),
    (79, 80, 0.0156, 0.0704), (68, 81, 0.00175, 0.0202),
    (81, 80, 0.0, 0.037), (77, 82, 0.0298, 0.0853),
    (82, 83, 0.0112, 0.03665), (83, 84, 0.0625, 0.132),
    (83, 85, 0.043, 0.148), (84, 85, 0.0302, 0.0641),
    (85, 86, 0.035, 0.123), (86, 87, 0.02828, 0.2074),
    (85, 88, 0.02, 0.102), (85, 89, 0.0239, 0.173),
    (88, 89, 0.0139, 0.0712), (89, 90, 0.0518, 0.188),
    (89, 90, 0.0238, 0.0997), (90, 91, 0.0254, 0.0836),
    (89, 92, 0.0099, 0.0505), (89, 92, 0.0393, 0.1581),
    (91, 92, 0.0387, 0.1272), (92, 93, 0.0258, 0.0848),
    (92, 94, 0.0481, 0.158), (93, 94, 0.0223, 0.0732),
    (94, 95, 0.0132, 0.0434), (80, 96, 0.0356, 0.182),
    (82, 96, 0.0162, 0.053), (94, 96, 0.0269, 0.0869),
    (80, 97, 0.0183, 0.0934), (80, 98, 0.0238, 0.108),
    (80, 99, 0.0454, 0.206), (92, 100, 0.0648, 0.295),
    (94, 100, 0.0178, 0.058), (95, 96, 0.0171, 0.0547),
    (96, 97, 0.0173, 0.0885), (98, 100, 0.0397, 0.179),
    (99, 100, 0.018, 0.0813), (100, 101, 0.0277, 0.1262),
    (92, 102, 0.0123, 0.0559), (101, 102, 0.0246, 0.112),
    (100, 103, 0.016, 0.0525), (100, 104, 0.0451, 0.204),
    (103, 104, 0.0466, 0.1584), (103, 105, 0.0535, 0.1625),
    (100, 106, 0.0605, 0.229), (104, 105, 0.00994, 0.0378),
    (105, 106, 0.014, 0.0547), (105, 107, 0.053, 0.183),
    (105, 108, 0.0261, 0.0703), (106, 107, 0.053, 0.183),
    (108, 109, 0.0105, 0.0288), (103, 110, 0.03906, 0.1813),
    (109, 110, 0.0278, 0.0762), (110, 111, 0.022, 0.0755),
    (110, 112, 0.0247, 0.064), (17, 113, 0.00913, 0.0301),
    (32, 113, 0.0615, 0.203), (32, 114, 0.0135, 0.0612),
    (27, 115, 0.0164, 0.0741), (114, 115, 0.0023, 0.0104),
    (68, 116, 0.00034, 0.00405), (12, 117, 0.0329, 0.14),
    (75, 118, 0.0145, 0.0481), (76, 118, 0.0164, 0.0544),
]
REF118 = 27  # chosen inside the partially observed region (sensor-anchored)


def merge_parallel(branches):
    """Merge parallel branches into one equivalent series impedance."""
    seen = {}
    order = []
    for f, t, r, x in branches:
        key = (min(f, t), max(f, t))
        z = complex(r, x)
        if key in seen:
            z0 = seen[key]
            seen[key] = (z0 * z) / (z0 + z)
        else:
            seen[key] = z
            order.append((f, t, key))
    merged = [(f, t, seen[key].real, seen[key].imag) for f, t, key in order]
    return merged, len(branches) - len(merged)


def line_flow(vi, ti, vj, tj, r, x):
    z = complex(r, x)
    ei = vi * cmath.exp(1j * ti)
    ej = vj * cmath.exp(1j * tj)
    return (ei * ((ei - ej) / z).conjugate()).real


def fix_zero_flows(buses, lines):
    """Nudge angles until every directed flow at the operating point is nonzero."""
    va = {b: math.radians(a) for b, _, a in buses}
    vm = {b: v for b, v, _ in buses}
    nudged = []
    for _ in range(20):
        bad = None
        for f, t, r, x in lines:
            if abs(line_flow(vm[f], va[f], vm[t], va[t], r, x)) < 1e-9 or \
               abs(line_flow(vm[t], va[t], vm[f], va[f], r, x)) < 1e-9:
                bad = (f, t)
                break
        if bad is None:
            break
        hi = max(bad)
        va[hi] += math.radians(0.01)
        nudged.append(hi)
    else:
        raise RuntimeError("could not remove degenerate zero flows")
    return [(b, vm[b], va[b]) for b, _, _ in buses], nudged


def emit(path, title, buses, ref, lines):
    with open(path, "w") as fh:
        fh.write(f"# {title}\n")
        fh.write("# generated by scripts/make_cases.py -- do not edit by hand\n")
        fh.write("# bus <id> <V p.u.> <theta rad>\n")
        for b, v, th in buses:
            fh.write(f"bus {b} {v:.6f} {th:.10f}\n")
        fh.write(f"ref {ref}\n")
        fh.write("# line <from> <to> <R p.u.> <X p.u.> <status>\n")
        for f, t, r, x in lines:
            fh.write(f"line {f} {t} {r:.6g} {x:.6g} 1\n")
        for b, _, _ in buses:
            fh.write(f"sensor inj {b}\n")
        for f, t, _, _ in lines:
            fh.write(f"sensor flow {f} {t}\n")
            fh.write(f"sensor flow {t} {f}\n")


def build(name, title, buses, ref, branches):
    lines, nmerged = merge_parallel(branches)
    fixed_buses, nudged = fix_zero_flows(buses, lines)
    emit(os.path.join(CASES, name), title, fixed_buses, ref, lines)
    m = len(buses) + 2 * len(lines)
    print(f"{name}: {len(buses)} buses, {len(lines)} lines "
          f"({nmerged} parallel pairs merged), {m} sensors, nudged={nudged}")
    return len(lines), nudged


def main():
    os.makedirs(CASES, exist_ok=True)
    n14, nudged14 = build("ieee14.case", "IEEE 14-bus test system, fully measured",
                          BUS14, REF14, BRANCH14)
    n118, nudged118 = build("ieee118.case", "IEEE 118-bus test system, fully measured",
                            BUS118, REF118, BRANCH118)
    with open(os.path.join(CASES, "README.md"), "w") as fh:
        fh.write(f"""# Shipped grid cases

Both files are generated by `scripts/make_cases.py` from the standard IEEE
test-system tables (topology, series impedances and the solved operating
point as distributed with MATPOWER/PYPOWER).

Conversions applied:

* Parallel branches merged into one equivalent line (`1/Z = 1/Z1 + 1/Z2`);
  the flow sensor of a merged line reads the combined flow. The 118-bus case
  has {186 - n118} such pairs, leaving {n118} lines (the 14-bus case has none: {n14} lines).
* Transformer taps, line charging and bus shunts are dropped; a line is its
  series impedance.
* Operating angles come from the solved case data (rounded to 0.01 deg in
  the source). Where rounding makes a connected line's real-power flow
  exactly zero at the operating point, the higher-numbered endpoint's angle
  is nudged by +0.01 deg (buses nudged: 14-bus {nudged14}, 118-bus {nudged118}).
* Sensors: fully measured — one injection sensor per bus (bus order), then
  for each line in file order a flow sensor per direction. 14-bus: m = 54;
  118-bus: m = {118 + 2 * n118}.
* Reference bus: 14-bus uses bus 1; the 118-bus file uses bus 27 so the
  partially observed scenarios around buses 27/32/114/115 contain the
  angle reference (any choice yields an equivalent model).
""")


if __name__ == "__main__":
    main()
