"""Regenerate the bundled nine-intersection corridor scenario.

East-west arterial with actuated through movements, short cross streets and
turning demand that loads the middle of the corridor:
free flow at I1-I3, moderate at I4-I6, I8, I9, saturated at I7.
"""

from pathlib import Path

SPACING = [450, 500, 400, 550, 200, 600, 450, 500]  # I1-I2 ... I8-I9
CYCLES = [90, 100, 110, 120, 100, 90, 120, 110, 100]
# (actuated min, comp min, range) per cycle length; yellows are 6 s each
TIMING = {90: (39, 30, 9), 100: (43, 35, 10), 110: (48, 39, 11), 120: (53, 43, 12)}
ENTRY, EXIT, CROSS = 500, 300, 250
SL, CROSS_SL, SHORT_SL = 15, 13.9, 12


def main(path):
    out = ["# Nine actuated intersections on an east-west arterial (generated by scripts/make_corridor.py).", ""]

    def link(id_, length, sl, heading, down=None, up=None):
        out.extend(["[link]", f"id = {id_}", f"length = {length}", f"speed_limit = {sl}",
                    f"approach_heading = {heading}"])
        if down:
            out.append(f"downstream_intersection = {down}")
        if up:
            out.append(f"upstream_intersection = {up}")
        out.append("")

    n = len(CYCLES)
    I = [f"I{j}" for j in range(1, n + 1)]
    for j in range(n):
        # eastbound approach into I_j, from the west
        length = ENTRY if j == 0 else SPACING[j - 1]
        sl = SHORT_SL if length <= 200 else SL
        link(f"eb_{j+1}", length, sl, "E", I[j], None if j == 0 else I[j - 1])
        length = ENTRY if j == n - 1 else SPACING[j]
        link(f"wb_{j+1}", length, SL, "W", I[j], None if j == n - 1 else I[j + 1])
        link(f"n_{j+1}", CROSS, CROSS_SL, "S", I[j])
        link(f"s_{j+1}", CROSS, CROSS_SL, "N", I[j])
        link(f"n_{j+1}_out", CROSS, CROSS_SL, "N", None, I[j])
        link(f"s_{j+1}_out", CROSS, CROSS_SL, "S", None, I[j])
    link("eb_out", EXIT, SL, "E", None, I[-1])
    link("wb_out", EXIT, SL, "W", None, I[0])

    lengths = {}
    for j in range(n):
        lengths[f"eb_{j+1}"] = ENTRY if j == 0 else SPACING[j - 1]
        lengths[f"wb_{j+1}"] = ENTRY if j == n - 1 else SPACING[j]
    for lid, length in lengths.items():
        short = lid.startswith("eb_") and length <= 200
        act = 40 if short else 60
        cnt = 100 if short else 160
        for kind, d in (("Counter", cnt), ("Actuator", act), ("StopBar", 0)):
            out.extend(["[detector]", f"kind = {kind}", f"link = {lid}", f"distance_to_stopline = {d}", ""])

    pos = 0.0
    for j in range(n):
        c = CYCLES[j]
        offset = round(pos / SL) % c
        out.extend(["[signal]", f"intersection = {I[j]}", f"cycle_length = {c}",
                    f"approaches = n_{j+1}, eb_{j+1}, s_{j+1}, wb_{j+1}",
                    "complementary_phase_index = 2", "min_gap = 3", f"offset = {offset}", ""])
        a_min, c_min, rng = TIMING[c]
        for state, lo, hi, act in (("rrrGGGrrrGGG", a_min, a_min + rng, "true"),
                                   ("rrryyyrrryyy", 6, 6, "false"),
                                   ("GGGrrrGGGrrr", c_min, c_min + rng, "false"),
                                   ("yyyrrryyyrrr", 6, 6, "false")):
            out.extend(["[phase]", f"intersection = {I[j]}", f"state = {state}",
                        f"min_duration = {lo}", f"max_duration = {hi}", f"actuated = {act}", ""])
        if j < n - 1:
            pos += SPACING[j]

    seed = iter(range(1, 100))

    def demand(route, rate):
        out.extend(["[demand]", f"route = {', '.join(route)}", f"arrival_rate = {rate}",
                    "sas_penetration = 0", "accel_mode = FixedKnown", f"seed = {next(seed)}", ""])

    demand([f"eb_{j}" for j in range(1, n + 1)] + ["eb_out"], "1/30")
    demand([f"wb_{j}" for j in range(n, 0, -1)] + ["wb_out"], "1/40")
    # turning flows: join at I3 and ride to the end; join at I6 and leave at I7
    demand(["n_3"] + [f"eb_{j}" for j in range(4, n + 1)] + ["eb_out"], "1/12")
    demand(["s_6", "eb_7", "s_7_out"], "1/8")
    for j in range(1, n + 1):
        demand([f"n_{j}", f"s_{j}_out"], "1/120")
        demand([f"s_{j}", f"n_{j}_out"], "1/120")
    Path(path).write_text("\n".join(out), encoding="utf-8")


if __name__ == "__main__":
    main(Path(__file__).resolve().parents[1] / "src" / "sasim" / "scenarios" / "corridor9.scn")
