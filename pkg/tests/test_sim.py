import numpy as np
import pytest

from secure_aircomp import sim
from secure_aircomp.channel import ChannelProtocol, sample_channel
from secure_aircomp.errors import ConfigError, InfeasibleDesignError
from secure_aircomp.rng import stream


def small_spec(**kw):
    params = dict(snr_grid_db=(0.0, 5.0, 10.0), trials=40, master_seed=7, empirical_check_fraction=0.1,
                  empirical_draws=50, chunk_size=16)
    params.update(kw)
    return sim.SweepSpec(**params)


def test_derive_seed_is_stable_and_distinct():
    assert sim.derive_seed(0, 1) == sim.derive_seed(0, 1)
    seeds = {sim.derive_seed(0, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert sim.derive_seed(0, 1, 2) != sim.derive_seed(0, 2, 1)
    assert 0 <= sim.derive_seed(123, 4) < 2**64


def test_is_checked_fraction():
    picks = [i for i in range(1000) if sim.is_checked(i, 0.01)]
    assert len(picks) == 10
    assert not any(sim.is_checked(i, 0.0) for i in range(100))
    assert all(sim.is_checked(i, 1.0) for i in range(100))


def test_sweep_is_deterministic(ref_cfg, ref_proto):
    a = sim.to_csv(sim.run_sweep(ref_cfg, ref_proto, small_spec()))
    b = sim.to_csv(sim.run_sweep(ref_cfg, ref_proto, small_spec()))
    assert a == b
    c = sim.to_csv(sim.run_sweep(ref_cfg, ref_proto, small_spec(master_seed=8)))
    assert a != c


def test_sweep_independent_of_workers(ref_cfg, ref_proto):
    spec = small_spec()
    a = sim.to_csv(sim.run_sweep(ref_cfg, ref_proto, spec, workers=1))
    b = sim.to_csv(sim.run_sweep(ref_cfg, ref_proto, spec, workers=2))
    assert a == b


def test_single_trial_matches_sweep(ref_cfg, ref_proto):
    spec = small_spec(trials=1, empirical_draws=0)
    res = sim.run_sweep(ref_cfg, ref_proto, spec)
    for snr_db in spec.snr_grid_db:
        for method in spec.methods:
            rep = sim.run_trial(ref_cfg, ref_proto, snr_db, method, sim.derive_seed(spec.master_seed, 0))
            row = res.row(snr_db, method)
            assert rep.S_closed == row.s_closed_mean
            assert rep.D_closed == row.d_closed_mean
            assert np.isnan(row.s_closed_se)


def test_zero_scaling_trial_gives_prior(ref_cfg, ref_proto):
    ch = sample_channel(ref_cfg, ref_proto, stream(1, "channel"))
    for method in sim.METHOD_IDS:
        rep = sim.evaluate_trial(ref_cfg, ch, 0.0, method)
        assert rep.D_closed == 10.0 and rep.S_closed == 10.0


def test_sweep_structure(ref_cfg, ref_proto):
    spec = small_spec()
    res = sim.run_sweep(ref_cfg, ref_proto, spec)
    assert len(res.rows) == len(spec.snr_grid_db) * len(spec.methods)
    for snr_db in spec.snr_grid_db:
        ds = {res.row(snr_db, m).d_closed_mean for m in spec.methods}
        assert len(ds) == 1
        for m in spec.methods:
            r = res.row(snr_db, m)
            assert r.rejected_fraction == 0 and r.trials == spec.trials
            assert r.d_emp_mean is not None and r.s_emp_mean is not None
    assert np.all(np.diff(res.series("no_noise", "d_closed_mean")) < 0)
    assert np.all(res.series("rre_known_csi", "s_closed_mean") >= res.series("rre_unknown_csi", "s_closed_mean") - 1e-12)
    with pytest.raises(KeyError):
        res.row(3.0, "no_noise")


def test_csv_round_trip(ref_cfg, ref_proto):
    res = sim.run_sweep(ref_cfg, ref_proto, small_spec())
    text = sim.to_csv(res)
    assert text.splitlines()[0] == ",".join(sim.CSV_COLUMNS)
    back = sim.parse_csv(text)
    assert back == res.rows
    assert sim.to_csv(sim.SweepResult(res.spec, back)) == text


def test_csv_blank_empirical_columns(ref_cfg, ref_proto):
    res = sim.run_sweep(ref_cfg, ref_proto, small_spec(empirical_draws=0))
    line = sim.to_csv(res).splitlines()[1].split(",")
    assert line[7:11] == ["", "", "", ""]


def test_empty_methods(ref_cfg, ref_proto):
    res = sim.run_sweep(ref_cfg, ref_proto, small_spec(methods=()))
    assert sim.to_csv(res) == ",".join(sim.CSV_COLUMNS) + "\n"
    assert sim.to_plot_data(res).splitlines() == ["snr_db snr_linear"]


def test_plot_data_columns(ref_cfg, ref_proto):
    spec = small_spec(methods=("no_noise", "naive_svd"))
    lines = sim.to_plot_data(sim.run_sweep(ref_cfg, ref_proto, spec)).splitlines()
    assert len(lines) == 1 + len(spec.snr_grid_db)
    assert all(len(line.split()) == 2 + 4 * 2 for line in lines)


def test_grid_above_max_snr_is_infeasible(ref_cfg, ref_proto):
    with pytest.raises(InfeasibleDesignError):
        sim.run_sweep(ref_cfg, ref_proto, small_spec(snr_grid_db=(0.0, 16.0)))


@pytest.mark.parametrize("bad", [dict(trials=0), dict(snr_grid_db=(5.0, 1.0)), dict(methods=("bogus",)),
                                 dict(empirical_check_fraction=2.0)])
def test_bad_specs(ref_cfg, ref_proto, bad):
    with pytest.raises(ConfigError):
        sim.run_sweep(ref_cfg, ref_proto, small_spec(**bad))


def test_free_rayleigh_counts_rejections(ref_cfg):
    proto = ChannelProtocol(mode="free_rayleigh")
    res = sim.run_sweep(ref_cfg, proto, small_spec(snr_grid_db=(0.0, 15.0), trials=100, empirical_draws=0))
    lo, hi = res.row(0.0, "no_noise"), res.row(15.0, "no_noise")
    assert hi.rejected_fraction > lo.rejected_fraction
    assert hi.trials == round(100 * (1 - hi.rejected_fraction))


def test_write_atomic(tmp_path):
    target = tmp_path / "sub" / "out.csv"
    sim.write_atomic(target, "a,b\n")
    assert target.read_text() == "a,b\n"
    assert sim.default_plot_path(target).name == "out.plot.dat"
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="could not write"):
        sim.write_atomic(blocker / "out.csv", "x")


def test_summary_mentions_methods(ref_cfg, ref_proto, tmp_path):
    res = sim.run_sweep(ref_cfg, ref_proto, small_spec(trials=5))
    text = sim.summarize(res, tmp_path / "r.csv", tmp_path / "r.plot.dat")
    assert "rre_known_csi" in text
    assert (tmp_path / "r.csv").exists() and (tmp_path / "r.plot.dat").exists()


def test_reference_spec_defaults():
    spec = sim.reference_sweep_spec()
    assert spec.snr_grid_db == tuple(float(x) for x in range(16)) and spec.trials == 10_000
