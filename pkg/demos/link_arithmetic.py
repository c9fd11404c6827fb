"""
Transit time on a shaped link
=============================

A 1 Mbit record over a 1 Mbps link with 10 ms of propagation delay
spends one second on the wire and arrives 10 ms later. A second record
sent at the same instant waits for the pipe.
"""

from fractions import Fraction

from continuum_lab.emulator import Link, Message, link_transit
from continuum_lab.rng import SplitMix64
from continuum_lab.spec import NetworkRule

rule = NetworkRule("edge", "cloud", delay_ns=10_000_000, bandwidth_bps=1_000_000)
link = Link("edge", "cloud", rule, SplitMix64(0))

for k in range(3):
    arrival = link_transit(link, Message(k, "cam.0", "store.0", 1_000_000, 0), 0)
    print(f"record {k}: sent at 0 ns, arrives at {arrival:,} ns")

# Jitter adds a uniform [0, jitter_ns] term; loss draws one number per send.
noisy = Link("edge", "cloud", NetworkRule("edge", "cloud", 10_000_000, 2_000_000, None, Fraction(1, 5)),
             SplitMix64.for_role(42, "link", "edge", "cloud", 0))
arrivals = [link_transit(noisy, Message(k, "cam.0", "store.0", 8, 0), 0) for k in range(10)]
print("noisy link:", ["lost" if a is None else f"{a / 1e6:.3f} ms" for a in arrivals])
print("rng draws used:", noisy.rng.draws)
