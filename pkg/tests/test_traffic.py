import math

import numpy as np
import pytest
from scipy import stats

from rrcstorm.des import RngStream, Simulator
from rrcstorm.distributions import Constant
from rrcstorm.network import LinkDelays, Network, NetworkConfig
from rrcstorm.rrc import RrcTimers
from rrcstorm.scenario import default_dict
from rrcstorm.traffic import (
    KB, PageRequest, UnorderedTrace, WebBrowsingApp, WebModelParams, build_page_response,
    count, read_script, replay_script,
)

PARAMS = WebModelParams.from_scenario(default_dict()["web"])


class FakeNet:
    """Records calls instead of moving bytes."""

    def __init__(self):
        self.sim = Simulator()
        self.up = []

    def uplink(self, ue, nbytes, cb, arg):
        self.up.append((self.sim.now, nbytes))

    def downlink(self, *a):
        pass


class Ue:
    id = 0
    listeners = []


def test_scenario_params_match_table_defaults():
    assert PARAMS.inter_request.bounds() == (10.0, 600.0)
    assert PARAMS.image_len.bounds() == (1.2 * KB, 400 * KB)
    assert PARAMS.inter_session.mean == 1200.0
    assert PARAMS.activity_period == Constant(24 * 3600.0)


@pytest.mark.parametrize("name", list(WebModelParams.KEYS.values()))
def test_every_parameter_respects_its_bounds(name):
    dist = getattr(PARAMS, name[0])
    lo, hi = dist.bounds()
    x = dist.sample_n(RngStream(0, 5), 1_000_000)
    assert x.min() >= lo and x.max() <= hi


def test_session_of_two_pages():
    net = FakeNet()
    p = WebModelParams(pages_per_session=Constant(2.0), inter_request=Constant(30.0),
                       inter_session=Constant(1000.0), activation_delay=Constant(0.0),
                       initial_session_delay_factor=0.0)
    app = WebBrowsingApp(net, Ue(), p, RngStream(1, 1), 10)
    app.start()
    net.sim.run_until(1500)
    assert [t for t, _ in net.up] == [0.0, 30.0, 1030.0, 1060.0]
    assert app.sessions_started == 2


def test_pages_per_session_mean_matches_truncated_normal_oracle():
    d = PARAMS.pages_per_session
    x = d.sample_n(RngStream(2, 5), 10_000)
    n = np.maximum(1, np.floor(x + 0.5))
    # E[round(X)] for X ~ N(10, 5) truncated below at 2, by summing bin masses
    tn = stats.truncnorm((2 - 10) / 5, np.inf, 10, 5)
    k = np.arange(2, 60)
    oracle = np.sum(k * (tn.cdf(k + 0.5) - tn.cdf(k - 0.5)))
    assert n.mean() == pytest.approx(oracle, abs=0.2)
    assert abs(n.mean() - 10) <= 1.0


def test_object_split_rounds_half_up():
    p = WebModelParams(objects_per_page=Constant(10.0), image_ratio=Constant(0.5))
    plan = build_page_response(None, p, RngStream(0, 1))
    assert plan.n_images == 5 and len(plan.objects) == 10
    p = WebModelParams(objects_per_page=Constant(5.0), image_ratio=Constant(0.5))
    assert build_page_response(None, p, RngStream(0, 1)).n_images == 3
    assert count(2.5) == 3 and count(2.4999) == 2 and count(-1) == 0


def test_no_objects_completes_after_main_page():
    sim = Simulator()
    cfg = NetworkConfig(links=LinkDelays(0, 0, 0, 0), rate_jitter=0.0)
    net = Network(sim, cfg, 1)
    done = []
    p = WebModelParams(objects_per_page=Constant(0.0), main_page_len=Constant(1000.0))
    app = WebBrowsingApp(net, net.ues[0], p, RngStream(0, 1), 10,
                         on_page_done=lambda ue, req: done.append(req))
    replay_script(app, [(1.0, "page")])
    sim.run_until(100)
    assert len(done) == 1 and len(done[0].completion_times) == 1


def test_response_time_is_last_object():
    req = PageRequest(5.0, 0, 600.0, completion_times=[6.0, 9.5, 7.0])
    assert req.response_time == 4.5


def test_image_sizes_within_bounds():
    r = RngStream(4, 1)
    sizes = [s for _ in range(300) for k, s, _ in build_page_response(None, PARAMS, r).objects
             if k == "image"]
    assert sizes and min(sizes) >= 1.2 * KB and max(sizes) <= 400 * KB


def test_replay_script():
    net = FakeNet()
    app = WebBrowsingApp(net, Ue(), PARAMS, RngStream(1, 1), 10)
    assert replay_script(app, []) == 0
    net.sim.run_until(100)
    assert net.up == []
    net = FakeNet()
    app = WebBrowsingApp(net, Ue(), PARAMS, RngStream(1, 1), 10)
    replay_script(app, [(10.0, "page")])
    net.sim.run_until(100)
    assert [t for t, _ in net.up] == [10.0]
    with pytest.raises(UnorderedTrace):
        replay_script(app, [(5.0, "page"), (4.0, "page")])


def _delivery_times(seed):
    sim = Simulator()
    net = Network(sim, NetworkConfig(), 1, seed=seed)
    done = []
    app = WebBrowsingApp(net, net.ues[0], PARAMS, RngStream(seed, 1), 10,
                         on_page_done=lambda ue, req: done.append(tuple(req.completion_times)))
    replay_script(app, [(1.0, "page"), (50.0, "page")])
    sim.run_until(200)
    return done


def test_replay_is_deterministic():
    assert _delivery_times(3) == _delivery_times(3)
    assert _delivery_times(3) != _delivery_times(4)


def test_read_script(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("time_s,action\n# warm up\n10,page\n\n25.5, page\n")
    assert read_script(f) == [(10.0, "page"), (25.5, "page")]
    f.write_text("oops\n")
    with pytest.raises(ValueError):
        read_script(f)
