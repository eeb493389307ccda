"""Analytic model only: how the RNC copes as misbehaving UEs are added.

Runs in about a second.  Shows the fixed-point wait, utilisation and the
per-attacker signalling rate, which stops growing once the server is busy.
"""
from rrcstorm.analytic import solve_congestion
from rrcstorm.scenario import Scenario

scn = Scenario.load(overrides=["n_ues=200"])
normal, delays = scn.normal_params(), scn.delay_profile()

for pch in (False, True):
    print(f"\npch {'enabled' if pch else 'disabled'}, tau = 2 s")
    print(f"{'attackers':>9} {'w (ms)':>8} {'rho':>6} {'RAN msg/s':>10} {'per attacker':>13} {'CN msg/s':>9}")
    attack = normal.with_attack("dch", 2.0)
    for m_a in (0, 2, 8, 16, 24, 40):
        s = solve_congestion(normal, attack, 200 - m_a, m_a, scn.timers(pch), delays, pch)
        per = f"{s.gamma_r_attack:.3f}" if m_a else "-"
        print(f"{m_a:9d} {1e3 * s.w:8.2f} {s.rho:6.3f} {s.big_gamma_r:10.2f} {per:>13} "
              f"{s.big_gamma_c:9.2f}")
