"""Simulation next to the analytic model on a handful of sweep points.

A reduced version of the desk sweep (one seed, three points per pch mode),
about a minute on one core.  The acceptance suite runs the full grid.
"""
import tempfile

from rrcstorm import runner
from rrcstorm.scenario import Scenario

scn = Scenario.load("scenarios/desk.yaml", ["simulation.seeds=[1]",
                                            "attacker_fraction=[0.04, 0.2]",
                                            "tau_mean_s=[0, 30]"])
with tempfile.TemporaryDirectory() as out:
    res = runner.run(scn, out, engine="both")
    rep = runner.compare_rows(res["simulation"], res["analytic"])

print(f"{'pch':>5} {'frac':>5} {'tau':>4} {'sim RAN':>8} {'model RAN':>10} {'dev':>6} "
      f"{'sim CN':>7} {'model CN':>9}")
for r in rep.rows:
    print(f"{str(r['pch']):>5} {r['attacker_fraction']:5.2f} {r['tau_mean_s']:4.0f} "
          f"{r['gamma_r_a']:8.2f} {r['gamma_r_b']:10.2f} {r['dev_r']:6.3f} "
          f"{r['gamma_c_a']:7.2f} {r['gamma_c_b']:9.2f}")
print(rep.summary())

sim = {(r["tau_mean_s"], r["attacker_fraction"], r["pch"]): r
       for r in res["simulation"] if r["seed"] == "mean"}
print("\nDCH time spent idle, attackers vs normal users")
for (tau, frac, pch), r in sorted(sim.items()):
    if frac:
        print(f"  pch={pch!s:5} frac={frac:.2f} tau={tau:4.0f}: "
              f"{r['dch_idle_attack']:.3f} vs {r['dch_idle_normal']:.3f}")
