"""
Preprocess at the edge, or ship raw data to the cloud?
======================================================

Both presets send 100 one-megabit camera records, one every five seconds,
over a 1 Mbps / 50 ms uplink. The hybrid preset first shrinks each record
to a tenth of its size on an edge node, which costs 20 ms of CPU.
"""

from continuum_lab import analytic_latency, build_scenario, run_experiment

for preset in ("cloud_centric", "hybrid"):
    archive = run_experiment(build_scenario(preset))
    summary = archive.repetitions[0].summaries
    lat = summary["e2e_latency_ns"]
    print(f"{preset:>13}: mean latency {lat.mean / 1e6:8.1f} ms "
          f"(closed form {analytic_latency(preset) / 1e6:.1f} ms), "
          f"p99 {lat.p99 / 1e6:.1f} ms, throughput {float(summary['throughput_rps'].mean):.2f} rec/s")

# Where does the crossover sit? Sweep the reduction factor.
print()
print("factor  hybrid latency (ms)")
for factor in ("1/100", "1/10", "1/2", "9/10", "1"):
    print(f"{factor:>6}  {analytic_latency('hybrid', factor=factor) / 1e6:10.1f}")
print(f"cloud-centric reference: {analytic_latency('cloud_centric') / 1e6:.1f} ms")

# Shorter periods make the raw uplink saturate; queueing shows up in p99.
busy = run_experiment(build_scenario("cloud_centric", n_records=20, period_ns=800_000_000))
print()
print("cloud_centric, one record every 0.8 s:",
      f"p99 latency {busy.repetitions[0].summaries['e2e_latency_ns'].p99 / 1e9:.2f} s")
