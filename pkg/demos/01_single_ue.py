"""One browsing user, two scripted page views, no attack.

Walks through the RRC state changes the page views cause and checks the
signalling count against the per-transition message table.
"""
from rrcstorm.des import RngStream, Simulator
from rrcstorm.network import Network, NetworkConfig
from rrcstorm.rrc import RrcTimers, transition_table
from rrcstorm.traffic import WebBrowsingApp, WebModelParams, replay_script

for pch in (False, True):
    sim = Simulator()
    net = Network(sim, NetworkConfig(pch_enabled=pch, timers=RrcTimers.defaults(pch)), 1, seed=1)
    ue = net.ues[0]
    pages = []
    app = WebBrowsingApp(net, ue, WebModelParams(), RngStream(1, (1, 1)), 10,
                         on_page_done=lambda u, req: pages.append(req.response_time))
    replay_script(app, [(10.0, "page"), (60.0, "page")])
    sim.run_until(400.0)

    print(f"\npch {'enabled' if pch else 'disabled'}")
    for t, _, src, dst in net.trace.transitions():
        print(f"  {t:8.3f} s  {src.name:>5} -> {dst.name}")
    table = transition_table(pch)
    expected = sum(table[(s, d)].ran_msgs for _, _, s, d in net.trace.transitions())
    print(f"  RAN messages {net.ran_count} (table says {expected}), CN messages {net.cn_count}")
    print("  page response times:", ", ".join(f"{r:.2f} s" for r in pages))
