import numpy as np
import pytest

from trionwg import (
    Branch,
    Dataset,
    FitParameter,
    FitProblem,
    LaserField,
    ModelContext,
    RABI_MAP,
    RABI_PUMP,
    bootstrap_uncertainty,
    dataset_from_csv,
    dataset_to_csv,
    evaluate_model,
    fit,
    fit_problem_from_json,
    fit_problem_to_json,
    fit_result_to_json,
    replace_device,
    replace_params,
    synth_dataset,
    t1_recovery_experiment,
    transition_energy,
)

RECOVERY_TRUTH = {"a": 0.5, "b": 0.45, "t1": 4.3e-6}
RECOVERY_X = np.linspace(1e-7, 1.5e-5, 31)


def recovery_free(initial_t1=2e-6):
    return (FitParameter("a", 0.4, 1e-3, 4.0),
            FitParameter("b", 0.4, 1e-3, 4.0),
            FitParameter("t1", initial_t1, 1e-7, 1e-4))


def recovery_problem(noise_sigma, seed):
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, noise_sigma, seed)
    return FitProblem(ds, "recovery", recovery_free())


def test_recovery_fit_noiseless_from_experiment(params, device):
    truth = replace_params(params, t1_spin=4.3e-6)
    dev0 = replace_device(device, kappa_cot_max=0.0)
    vc = device.plateau_center
    pump = LaserField(energy=transition_energy(dev0, truth, vc, Branch.BLUE),
                      rabi=RABI_PUMP)
    points = t1_recovery_experiment(truth, dev0, vc, pump, RECOVERY_X)
    ds = Dataset([t for t, _ in points], [s for _, s in points])
    res = fit(FitProblem(ds, "recovery", recovery_free()))
    assert res.converged
    assert res.values["t1"] == pytest.approx(4.3e-6, rel=0.05)
    assert res.values["a"] == pytest.approx(0.5, rel=0.01)


def test_recovery_fit_with_noise(params):
    res = fit(recovery_problem(0.01, seed=3))
    assert res.values["t1"] == pytest.approx(4.3e-6, rel=0.15)


def test_linecut_fit_recovers_spin_lifetime(params, device):
    ctx = ModelContext(params, device, sd_nodes=32)
    x = np.linspace(device.v_plateau_low, device.v_plateau_high, 41)
    truth = {"t1_spin": 3.8e-6, "amplitude": 1.0, "rabi": RABI_MAP}
    ds = synth_dataset("plateau_linecut", truth, x, 0.01, seed=1, context=ctx)
    free = (FitParameter("t1_spin", 1.5e-6, 1e-7, 1e-4),
            FitParameter("amplitude", 0.5, 1e-3, 1e3))
    res = fit(FitProblem(ds, "plateau_linecut", free, {"rabi": RABI_MAP}, ctx))
    assert res.values["t1_spin"] == pytest.approx(3.8e-6, rel=0.15)


def test_transmission_fit_recovers_coupling(params, device):
    ctx = ModelContext(params, device)
    x = np.linspace(-2e-5, 2e-5, 81)
    ds = synth_dataset("transmission", {"beta": 0.6}, x, 0.0, seed=0,
                       context=ctx)
    free = (FitParameter("beta", 0.4, 1e-3, 1.0),)
    res = fit(FitProblem(ds, "transmission", free, {}, ctx))
    assert res.values["beta"] == pytest.approx(0.6, abs=1e-3)


def test_zero_free_parameters_scores_fixed_point():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    res = fit(FitProblem(ds, "recovery", (), dict(RECOVERY_TRUTH)))
    assert res.values == {}
    assert res.rss == pytest.approx(0.0, abs=1e-24)
    assert res.converged
    assert res.iterations == 0


def test_synth_dataset_reproducible():
    clean = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    model = RECOVERY_TRUTH["a"] - RECOVERY_TRUTH["b"] * np.exp(
        -RECOVERY_X / RECOVERY_TRUTH["t1"])
    assert np.array_equal(clean.y, model)
    a = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.02, seed=5)
    b = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.02, seed=5)
    assert np.array_equal(a.y, b.y)
    c = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.02, seed=6)
    assert not np.array_equal(a.y, c.y)


def test_synth_noise_is_multiplicative_and_unbiased():
    x = np.linspace(1e-7, 1.5e-5, 10_000)
    sigma = 0.05
    ds = synth_dataset("recovery", RECOVERY_TRUTH, x, sigma, seed=11)
    model = RECOVERY_TRUTH["a"] - RECOVERY_TRUTH["b"] * np.exp(
        -x / RECOVERY_TRUTH["t1"])
    ratio = ds.y / model
    assert abs(ratio.mean() - 1.0) < 3 * sigma / np.sqrt(x.size)
    assert ratio.std() == pytest.approx(sigma, rel=0.05)


def test_fit_respects_bounds_and_never_worsens():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    free = (FitParameter("a", 0.45, 1e-3, 4.0),
            FitParameter("b", 0.4, 1e-3, 4.0),
            FitParameter("t1", 1.2e-6, 1e-6, 2e-6))
    res = fit(FitProblem(ds, "recovery", free))
    assert 1e-6 <= res.values["t1"] <= 2e-6
    initial_rss = float(np.sum((ds.y - evaluate_model(
        FitProblem(ds, "recovery", free),
        {p.name: p.initial for p in free})) ** 2))
    assert res.rss <= initial_rss + 1e-24


def test_fit_scale_equivariance():
    problem = recovery_problem(0.02, seed=9)
    res = fit(problem)
    scaled = FitProblem(Dataset(problem.dataset.x, 2.0 * problem.dataset.y),
                        "recovery", recovery_free())
    res2 = fit(scaled)
    assert res2.values["t1"] == pytest.approx(res.values["t1"], rel=1e-4)
    assert res2.values["a"] == pytest.approx(2 * res.values["a"], rel=1e-4)
    assert res2.values["b"] == pytest.approx(2 * res.values["b"], rel=1e-4)
    assert res2.rss == pytest.approx(4 * res.rss, rel=1e-6)


def test_weighted_rss_uses_y_err():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.02, seed=2)
    weighted = Dataset(ds.x, ds.y, np.full(ds.x.size, 0.5))
    p_plain = FitProblem(ds, "recovery", (), dict(RECOVERY_TRUTH))
    p_weighted = FitProblem(weighted, "recovery", (), dict(RECOVERY_TRUTH))
    assert fit(p_weighted).rss == pytest.approx(4 * fit(p_plain).rss, rel=1e-12)


def test_bootstrap_zero_noise_collapses():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    problem = FitProblem(ds, "recovery", recovery_free())
    res = fit(problem)
    boot = bootstrap_uncertainty(problem, res, n_resamples=50, seed=4)
    assert boot.n_failed == 0
    for name, std in boot.std.items():
        assert std < 1e-10, name


def test_bootstrap_scales_with_noise():
    spreads = []
    for sigma in (0.01, 0.04):
        problem = recovery_problem(sigma, seed=12)
        res = fit(problem)
        boot = bootstrap_uncertainty(problem, res, n_resamples=80, seed=8)
        spreads.append(boot.std["t1"])
    assert spreads[1] > 2 * spreads[0]


def test_bootstrap_deterministic_and_stable():
    problem = recovery_problem(0.02, seed=13)
    res = fit(problem)
    a = bootstrap_uncertainty(problem, res, n_resamples=60, seed=21)
    b = bootstrap_uncertainty(problem, res, n_resamples=60, seed=21)
    assert a.std == b.std
    big = bootstrap_uncertainty(problem, res, n_resamples=400, seed=21)
    assert a.std["t1"] == pytest.approx(big.std["t1"], rel=0.4)
    with pytest.raises(ValueError):
        bootstrap_uncertainty(problem, res, n_resamples=10, seed=0)


def test_bootstrap_threads_match_serial():
    problem = recovery_problem(0.02, seed=14)
    res = fit(problem)
    serial = bootstrap_uncertainty(problem, res, n_resamples=60, seed=2)
    threaded = bootstrap_uncertainty(problem, res, n_resamples=60, seed=2,
                                     threads=3)
    assert serial.std == threaded.std


def test_problem_json_round_trip(params, device):
    ctx = ModelContext(params, device, sd_nodes=16)
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.01, seed=1)
    problem = FitProblem(Dataset(ds.x, ds.y, np.full(ds.x.size, 0.01), ds.meta),
                         "recovery", recovery_free(), {"offset": 0.0}, ctx)
    doc = fit_problem_to_json(problem)
    back = fit_problem_from_json(doc)
    assert back.model == "recovery"
    assert np.array_equal(back.dataset.x, problem.dataset.x)
    assert np.array_equal(back.dataset.y, problem.dataset.y)
    assert np.array_equal(back.dataset.y_err, problem.dataset.y_err)
    assert back.free == problem.free
    assert back.fixed == problem.fixed
    assert back.context.params == params
    assert back.context.device == device
    assert back.context.sd_nodes == 16
    bare = fit_problem_from_json(fit_problem_to_json(
        FitProblem(ds, "recovery", recovery_free())))
    assert bare.context is None
    assert bare.dataset.y_err is None


def test_result_json_includes_bootstrap():
    problem = recovery_problem(0.02, seed=15)
    res = fit(problem)
    boot = bootstrap_uncertainty(problem, res, n_resamples=50, seed=3)
    doc = fit_result_to_json(res, boot)
    assert doc["values"] == res.values
    assert doc["rss"] == res.rss
    assert doc["uncertainty"] == boot.std
    assert doc["bootstrap"] == {"n_resamples": 50, "n_failed": boot.n_failed,
                                "seed": 3}
    plain = fit_result_to_json(res)
    assert plain["uncertainty"] is None


def test_dataset_csv_round_trip(tmp_path):
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.01, seed=2)
    path = tmp_path / "plain.csv"
    dataset_to_csv(ds, path)
    back = dataset_from_csv(path)
    assert np.array_equal(back.x, ds.x)
    assert np.array_equal(back.y, ds.y)
    assert back.y_err is None

    with_err = Dataset(ds.x, ds.y, np.full(ds.x.size, 0.015))
    path2 = tmp_path / "err.csv"
    dataset_to_csv(with_err, path2)
    back2 = dataset_from_csv(path2)
    assert np.array_equal(back2.y_err, with_err.y_err)

    bad = tmp_path / "bad.csv"
    bad.write_text("time,signal\n1.0,2.0\n")
    with pytest.raises(ValueError):
        dataset_from_csv(bad)


def test_problem_validation():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    with pytest.raises(ValueError, match="unknown model"):
        FitProblem(ds, "nope", recovery_free())
    with pytest.raises(ValueError, match="duplicate"):
        FitProblem(ds, "recovery", (FitParameter("t1", 1e-6, 1e-7, 1e-4),
                                    FitParameter("t1", 2e-6, 1e-7, 1e-4)))
    with pytest.raises(ValueError, match="both free and fixed"):
        FitProblem(ds, "recovery", recovery_free(), {"t1": 3e-6})
    tiny = Dataset(ds.x[:3], ds.y[:3])
    with pytest.raises(ValueError, match="data point"):
        FitProblem(tiny, "recovery", recovery_free())
    with pytest.raises(ValueError):
        FitParameter("t1", 1e-6, 1e-4, 1e-7)
    with pytest.raises(ValueError):
        FitParameter("t1", 1e-5, 1e-7, 1e-6)
    with pytest.raises(ValueError):
        Dataset([1.0, 2.0], [1.0, 2.0], [0.1, 0.0])
    with pytest.raises(ValueError):
        Dataset([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="unknown model"):
        synth_dataset("nope", {}, RECOVERY_X, 0.0, seed=0)
    with pytest.raises(ValueError):
        synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, -0.1, seed=0)


def test_evaluate_model_merges_fixed():
    ds = synth_dataset("recovery", RECOVERY_TRUTH, RECOVERY_X, 0.0, seed=0)
    problem = FitProblem(ds, "recovery",
                         (FitParameter("t1", 2e-6, 1e-7, 1e-4),),
                         {"a": 0.5, "b": 0.45})
    y = evaluate_model(problem, {"t1": 4.3e-6})
    assert np.array_equal(y, ds.y)
