import csv
from dataclasses import replace

import pytest

from udsdm.metrics import (
    COMPARE_HEADER,
    MetricsError,
    compute_delta,
    compute_phi,
    compute_psi,
    report,
    write_comparison,
    write_plot_data,
    write_report,
)
from udsdm.simulator import ExperimentRun, LogEntry, MessageLog, NodeInfo, SimConfig, compare, run_experiments


def test_phi_examples():
    assert compute_phi([[50]], 100) == 0.5
    assert compute_phi([[100, 100, 100]], 100) == 1.0
    assert compute_phi([[25], [75]], 100) == 0.5


def test_delta_examples():
    assert compute_delta([[([1, 2], [1, 2]), ([0.5], [0.5])]]) == 0.0
    assert compute_delta([[([1, 2], [0, 0])]]) == 3.0
    assert compute_delta([[([1, 0], [0, 0]), ([3, 0], [0, 0])]]) == 2.0


def test_psi_examples():
    assert compute_psi(100, 4) == 25
    assert compute_psi(100, 1) == 100
    assert compute_psi(100, 100) == 1


def test_empty_inputs_rejected():
    with pytest.raises(MetricsError):
        compute_phi([], 100)
    with pytest.raises(MetricsError):
        compute_phi([[50], []], 100)
    with pytest.raises(MetricsError):
        compute_delta([])
    with pytest.raises(MetricsError):
        compute_psi(100, 0)
    with pytest.raises(MetricsError):
        report([])


def test_phi_range_checked():
    with pytest.raises(MetricsError):
        compute_phi([[0]], 100)
    with pytest.raises(MetricsError):
        compute_phi([[101]], 100)


def test_delta_shape_checked():
    with pytest.raises(MetricsError):
        compute_delta([[([1, 2], [1])]])


def _toy_run(entries, T=10, n_vectors=40, eval_start=10, offset=0):
    cfg = SimConfig(n_nodes=1, epoch_length=T, policy="bm", experiments=1)
    log = MessageLog([LogEntry(0, s, 8, k, d) for s, k, d in entries])
    return ExperimentRun(cfg, 0, [NodeInfo(0, offset, n_vectors, eval_start, 0.0, 1.0)], log)


def test_forced_only_run_has_phi_one():
    r = _toy_run([(s, "forced", 0.0) for s in (10, 20, 30, 40)])
    rep = report([r])
    assert rep.phi == 1.0 and rep.psi == 10.0 and rep.delta == 0.0
    assert rep.messages_forced == 3 and rep.messages_voluntary == 0


def test_toy_run_by_hand():
    # windows (10,20], (20,30], (30,40]; epochs 10->13->20->24->30->40
    r = _toy_run([(10, "forced", 0.0), (13, "voluntary", 2.0), (20, "forced", 1.0), (24, "voluntary", 4.0),
                  (30, "forced", 3.0), (40, "forced", 5.0)])
    rep = report([r])
    assert rep.phi == pytest.approx((3 + 7 + 4 + 6 + 10) / 5 / 10)
    assert rep.psi == pytest.approx((5 + 5 + 10) / 3)
    assert rep.delta == pytest.approx((2 + 1 + 4 + 3 + 5) / 5)
    assert [d.first_stop for d in rep.details] == [3, 4, 10]


def test_window_without_stop_is_an_error():
    with pytest.raises(MetricsError, match="no stop"):
        report([_toy_run([(10, "forced", 0.0), (20, "forced", 0.0)])])


def rescan(runs):
    """Straightforward recomputation of phi, delta and psi from the logs."""
    phis, deltas, psis = [], [], []
    for r in runs:
        T = r.config.epoch_length
        ratios, drifts, per_window = [], [], []
        for info in r.nodes:
            steps = [e.step for e in r.log.entries if e.node_id == info.node_id]
            for a, b in zip(steps, steps[1:]):
                if a >= info.eval_start and b <= info.n_vectors:
                    ratios.append((b - a) / T)
            start = info.offset
            while start < info.eval_start:
                start += T
            while start + T <= info.n_vectors:
                inside = [e for e in r.log.entries if e.node_id == info.node_id and start < e.step <= start + T]
                per_window.append(T / len(inside))
                drifts.extend(e.drift for e in inside)
                start += T
        phis.append(sum(ratios) / len(ratios))
        deltas.append(sum(drifts) / len(drifts))
        psis.append(sum(per_window) / len(per_window))
    return sum(phis) / len(phis), sum(deltas) / len(deltas), sum(psis) / len(psis)


@pytest.mark.parametrize("policy", ["udsdm", "pm", "bm"])
def test_double_entry_rescan(policy, quick_config, quick_cache):
    runs = run_experiments(replace(quick_config, policy=policy), quick_cache)
    rep = report(runs)
    phi, delta, psi = rescan(runs)
    assert rep.phi == pytest.approx(phi, rel=1e-12)
    assert rep.delta == pytest.approx(delta, rel=1e-12)
    assert rep.psi == pytest.approx(psi, rel=1e-12)
    assert 0 < rep.phi <= 1 and 0 < rep.psi <= rep.T


def test_writers(quick_config, quick_cache, tmp_path):
    rows = compare([replace(quick_config, policy=p) for p in ("bm", "udsdm")], quick_cache)
    write_comparison(rows, tmp_path / "compare.csv")
    with (tmp_path / "compare.csv").open() as fh:
        table = list(csv.DictReader(fh))
    assert list(table[0]) == COMPARE_HEADER
    assert table[0]["dod_p_mean"] == "" and table[1]["dod_p_mean"] != ""
    paths = write_plot_data(rows, tmp_path)
    assert [p.name for p in paths] == ["plot_phi.csv", "plot_delta.csv", "plot_psi.csv"]
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "series,x,y" and lines[1].startswith("bm@theta=0.6,50,")
    rep = report(run_experiments(quick_config, quick_cache))
    write_report(rep, tmp_path / "metrics.csv")
    text = (tmp_path / "metrics.csv").read_text().splitlines()
    assert text[0].startswith("phi,delta,psi") and text[2] == "" and len(text) == 4 + len(rep.details)
