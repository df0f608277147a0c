#!/usr/bin/env python3
"""Walk one market through the two-level mode choice model.

Shows the utility each unimodal mode gets, how the hub's transfer
combos form a nest, and what the nesting coefficient and the segment
constant do to the predicted shares.
"""

import math

from hubmodal import (
    ComboId,
    HubParams,
    Mode,
    ModeAttr,
    Segment,
    TasteVector,
    mode_utility,
    nest_logsum,
    nested_shares,
    systematic_utility,
    value_of_time,
)

taste = TasteVector(
    beta_auto_tt=-0.05, beta_trans_ivt=-0.03, beta_trans_at=-0.05,
    beta_trans_et=-0.05, beta_trans_n=-0.4, beta_nonveh_tt=-0.07, beta_cost=-0.3,
    asc_driving=0.5, asc_transit=-0.5, asc_ondemand=-1.0, asc_biking=-1.5, asc_walking=-0.8,
)
print(f"value of auto time: ${value_of_time(taste):.2f}/hour")

attrs = {
    Mode.DRIVING: ModeAttr(ivt_min=22.0, cost_usd=3.2),
    Mode.TRANSIT: ModeAttr(ivt_min=38.0, access_min=7.0, egress_min=5.0, transfers=1.0, cost_usd=1.5),
    Mode.CARPOOL: ModeAttr(ivt_min=26.0, cost_usd=1.6),
    Mode.WALKING: ModeAttr(ivt_min=85.0),
}
uni = {m: systematic_utility(taste, a, m) for m, a in attrs.items()}
print("\nunimodal utilities:")
for m, v in uni.items():
    print(f"  {m.value:14s} {v:7.3f}")

# two transfer combos at the hub: park the car and ride the bus, or
# walk in and ride the bus
combos = {
    ComboId(Mode.CAR, Mode.BUS): (
        mode_utility(taste, Mode.CAR, ivt_min=9.0, cost_usd=0.5 * 3.5)
        + mode_utility(taste, Mode.BUS, ivt_min=16.0, access_min=3.0, egress_min=2.0, cost_usd=1.5)
    ),
    ComboId(Mode.WALK_LEG, Mode.BUS): (
        mode_utility(taste, Mode.WALK_LEG, ivt_min=12.0)
        + mode_utility(taste, Mode.BUS, ivt_min=16.0, access_min=3.0, egress_min=2.0, cost_usd=1.5)
    ),
}
print("\ncombo utilities:")
for c, v in combos.items():
    print(f"  {c.entry.value}+{c.exit.value:10s} {v:7.3f}")

params = HubParams(beta_hub=0.5, asc_by_segment={s: -2.0 for s in Segment})
ns = nested_shares(uni, combos, params, Segment.LOW_INCOME)
print(f"\nnest logsum (beta 0.5): {nest_logsum(list(combos.values()), 0.5):.3f}")
print(f"hub nest share: {ns.hub_share:.4f}")
print("upper-level shares:")
for m, p in ns.upper.items():
    print(f"  {m.value:14s} {p:.4f}")
print("within-nest shares and joint probabilities:")
for c, p in ns.lower.items():
    print(f"  {c.entry.value}+{c.exit.value:10s} {p:.4f}   joint {ns.joint(c):.4f}")

total = sum(ns.upper.values()) + ns.hub_share
print(f"shares sum to {total:.12f}")

# beta_hub = 1 with a zero constant collapses the nest: the combos just
# join the flat MNL choice set
flat = nested_shares(uni, combos, HubParams(beta_hub=1.0, asc_by_segment={s: 0.0 for s in Segment}), Segment.LOW_INCOME)
pooled = list(uni.values()) + list(combos.values())
denom = sum(math.exp(v) for v in pooled)
print(f"\ncollapsed joint of car+bus: {flat.joint(ComboId(Mode.CAR, Mode.BUS)):.6f}")
print(f"flat MNL same alternative:  {math.exp(combos[ComboId(Mode.CAR, Mode.BUS)]) / denom:.6f}")

# the segment constant moves the whole nest up or down
print("\nhub share by nest constant (beta 0.5):")
for asc in (-6.0, -4.0, -2.0, -1.0, 0.0):
    p = HubParams(beta_hub=0.5, asc_by_segment={s: asc for s in Segment})
    print(f"  asc {asc:5.1f} -> {nested_shares(uni, combos, p, Segment.LOW_INCOME).hub_share:.4f}")

# a smaller beta_hub sharpens competition inside the nest
print("\nwithin-nest share of car+bus by beta_hub:")
for beta in (1.0, 0.6, 0.3, 0.1):
    p = HubParams(beta_hub=beta, asc_by_segment={s: -2.0 for s in Segment})
    print(f"  beta {beta:3.1f} -> {nested_shares(uni, combos, p, Segment.LOW_INCOME).lower[ComboId(Mode.CAR, Mode.BUS)]:.4f}")
