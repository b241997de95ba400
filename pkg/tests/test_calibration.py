from datetime import date

import numpy as np
import pytest

from pnetsim import (
    BehavioralParams,
    CheckpointError,
    GridSpec,
    IntegrationConfig,
    SchemaError,
    aad_vw,
    default_grid,
    grid_search,
    load_dataset,
    monte_carlo,
    quarterly_average,
    score_point,
    simulate,
    total_aad,
)
from pnetsim.calibration import (
    EmpiricalDataset,
    apply_grid_point,
    apply_sampled,
    default_sector_mapping,
    horizon_for,
    indicator_weights,
    load_sector_mapping,
    model_quarterly,
    parse_distributions,
    quarter_end,
    quarter_of,
    save_dataset,
    scale_to_aggregate,
    synthesize_dataset,
)
from pnetsim.fixtures import reference_scenario, scenario_for, sector_mapping_path

QUARTERS = ("2020Q2", "2020Q3", "2020Q4", "2021Q1")


# -- quarters ------------------------------------------------------------------

def test_quarter_labels():
    assert quarter_of(date(2020, 4, 1)) == "2020Q2"
    assert quarter_of(date(2020, 12, 31)) == "2020Q4"
    assert quarter_end("2020Q2") == date(2020, 6, 30)
    assert quarter_end("2021Q4") == date(2021, 12, 31)


def test_quarterly_average_constant_series():
    series = [(date(2020, 4, d), -10.0) for d in range(1, 20)]
    out = quarterly_average(series, QUARTERS)
    assert out == {"2020Q2": -10.0}


def test_quarterly_average_mean_of_two():
    series = [(date(2020, 5, 1), -10.0), (date(2020, 6, 1), -20.0)]
    assert quarterly_average(series, QUARTERS)["2020Q2"] == -15.0


def test_quarterly_average_daily_mean_91_days(d2, params):
    scenario = scenario_for(d2)
    traj = simulate(d2, scenario, params, IntegrationConfig(), horizon_for(scenario, QUARTERS))
    model = model_quarterly(traj, d2, None, QUARTERS)
    sel = [k for k, t in enumerate(traj.times)
           if quarter_of(traj.date_at(t)) == "2020Q2"]
    assert len(sel) == 91
    assert model["gdp"][("X1", "2020Q2")] == pytest.approx(0.0, abs=1e-9)


def test_empty_quarter_excluded():
    out = quarterly_average([(date(2020, 5, 1), -3.0)], QUARTERS)
    assert "2020Q3" not in out


# -- objective -----------------------------------------------------------------

def test_aad_perfect_fit_is_zero():
    model = {"a": -10.0, "b": -20.0}
    aad, ad = aad_vw(model, dict(model), {"a": 1.0, "b": 2.0})
    assert aad == 0.0 and ad == 0.0


def test_aad_hand_computed_case():
    weights = {"a": 110.0, "b": 100.0}
    data = {"a": -10.0, "b": -20.0}
    model = {"a": -12.0, "b": -15.0}
    aad, ad = aad_vw(model, data, weights)
    assert aad == pytest.approx((110 * 2 + 100 * 5) / 210, rel=1e-14)
    assert ad == pytest.approx((110 * -2 + 100 * 5) / 210, rel=1e-14)
    assert ad > 0  # the model is too optimistic on net


def test_aad_oracle_equivalence_randomized(rng):
    """Matches a plain-loop oracle to 1e-12; bias never exceeds accuracy."""
    for _ in range(100):
        n = int(rng.integers(1, 6))
        sectors = [f"s{k}" for k in range(n)]
        model = {s: float(rng.uniform(-50, 10)) for s in sectors}
        data = {s: float(rng.uniform(-50, 10)) for s in sectors}
        weights = {s: float(rng.uniform(0.1, 100)) for s in sectors}
        total_w = sum(weights.values())
        want_aad = sum(weights[s] * abs(data[s] - model[s]) for s in sectors) / total_w
        want_ad = sum(weights[s] * (model[s] - data[s]) for s in sectors) / total_w
        aad, ad = aad_vw(model, data, weights)
        assert abs(aad - want_aad) < 1e-12
        assert abs(ad - want_ad) < 1e-12
        assert abs(ad) <= aad + 1e-15


def test_aad_misaligned_sectors_rejected():
    with pytest.raises(ValueError):
        aad_vw({"a": 1.0}, {"b": 1.0}, {"a": 1.0, "b": 1.0})


def test_aad_zero_weights_rejected():
    with pytest.raises(ValueError):
        aad_vw({"a": 1.0}, {"a": 2.0}, {"a": 0.0})


def test_monotone_weighting_property(rng):
    for _ in range(50):
        sectors = ["a", "b", "c"]
        model = {s: float(rng.uniform(-30, 0)) for s in sectors}
        data = {s: float(rng.uniform(-30, 0)) for s in sectors}
        weights = {s: float(rng.uniform(1, 10)) for s in sectors}
        errors = {s: abs(data[s] - model[s]) for s in sectors}
        worst = max(sectors, key=errors.get)
        before, _ = aad_vw(model, data, weights)
        weights[worst] *= 2.0
        after, _ = aad_vw(model, data, weights)
        assert after >= before - 1e-12


def test_total_aad():
    cells = {("gdp", q): (4.69, 0.0) for q in QUARTERS}
    assert total_aad(cells) == pytest.approx(4.69)
    assert total_aad({("gdp", "2020Q2"): (0.0, 0.0),
                      ("b2b", "2020Q2"): (10.0, -1.0)}) == 5.0
    with pytest.raises(ValueError):
        total_aad({})


# -- dataset -------------------------------------------------------------------

def test_dataset_roundtrip(tmp_path):
    ds = EmpiricalDataset({
        "gdp": [(date(2020, 5, 15), "X1", -12.5), (date(2020, 8, 15), "X1", -6.25)],
        "employment": [(date(2020, 5, 15), "BE", -20.0)],
    })
    path = save_dataset(ds, tmp_path / "data.csv")
    again = load_dataset(path)
    assert again.indicators == ("gdp", "employment")
    assert again.observations["gdp"] == ds.observations["gdp"]


def test_dataset_rejects_unknown_indicator(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("indicator,date,sector,value_pct\nfoo,2020-05-01,X1,-1\n")
    with pytest.raises(SchemaError):
        load_dataset(path)


def test_dataset_rejects_duplicates(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(
        "indicator,date,sector,value_pct\n"
        "gdp,2020-05-01,X1,-1\ngdp,2020-05-01,X1,-2\n"
    )
    with pytest.raises(SchemaError):
        load_dataset(path)


def test_sector_mapping_file_matches_first_letter_rule():
    mapping = load_sector_mapping(sector_mapping_path())
    for code, letter in mapping.items():
        assert letter == code[0]


# -- model-to-indicator extraction ----------------------------------------------

def test_zero_shock_model_reductions_are_zero(d3, params):
    scenario = scenario_for(d3)
    traj = simulate(d3, scenario, params, IntegrationConfig(),
                    horizon_for(scenario, QUARTERS))
    model = model_quarterly(traj, d3, None, QUARTERS)
    for ind in ("gdp", "revenue", "employment", "b2b"):
        for value in model[ind].values():
            assert value == pytest.approx(0.0, abs=1e-9)


def test_indicator_weights(be64):
    w = indicator_weights(be64, "gdp")
    assert w["I55-56"] == float(be64.x0[be64.sectors.position("I55-56")])
    w = indicator_weights(be64, "employment")
    assert w["O84"] == float(be64.l0[be64.sectors.position("O84")])
    w21 = indicator_weights(be64, "b2b")
    rows = be64.Z.sum(axis=1)
    want_c = sum(float(rows[i]) for i, c in enumerate(be64.codes) if c.startswith("C"))
    assert w21["C"] == pytest.approx(want_c, rel=1e-12)


def test_b2b_aggregates_by_mapping(be64, params):
    scenario = reference_scenario()
    traj = simulate(be64, scenario, params, IntegrationConfig(), 50.0)
    mapping = default_sector_mapping(be64.codes)
    model = model_quarterly(traj, be64, mapping, ("2020Q1", "2020Q2"))
    groups = {g for (g, _) in model["b2b"]}
    assert groups <= set(mapping.values())


# -- grid mechanics --------------------------------------------------------------

def test_default_grid_size():
    assert default_grid().n_points == 1_555_200


def test_grid_point_order_is_lexicographic():
    grid = GridSpec((("a", (1, 2)), ("b", (10, 20, 30))))
    points = [p for _, p in grid]
    assert points[0] == {"a": 1, "b": 10}
    assert points[1] == {"a": 1, "b": 20}
    assert points[3] == {"a": 2, "b": 10}
    assert grid.n_points == 6


def test_grid_json_roundtrip(tmp_path):
    grid = default_grid()
    path = tmp_path / "grid.json"
    path.write_text(grid.to_json())
    again = GridSpec.from_json(path.read_text())
    assert again == grid
    assert again.content_hash() == grid.content_hash()


def test_grid_duplicate_axis_rejected():
    from pnetsim.errors import ValidationError
    with pytest.raises(ValidationError):
        GridSpec((("a", (1,)), ("a", (2,))))


def test_scale_to_aggregate(be64, ref_scenario):
    order = ref_scenario.index_for(be64.codes)
    eps = ref_scenario.eps_F_lockdown[order]
    scaled = scale_to_aggregate(eps, be64.f0, 0.10)
    agg = float(np.sum(scaled * be64.f0) / be64.f0.sum())
    assert agg == pytest.approx(0.10, rel=1e-9)
    assert np.all(scaled <= 1.0)
    with pytest.raises(ValueError):
        scale_to_aggregate(np.zeros(3), np.ones(3), 0.1)
    np.testing.assert_array_equal(
        scale_to_aggregate(np.zeros(3), np.ones(3), 0.0), np.zeros(3)
    )


def test_apply_grid_point_overrides(be64, ref_scenario):
    point = {
        "prod_fn": "weakly_critical",
        "eps_D_abc": 0.30,
        "eps_D_retail": 0.0,
        "eps_D_consumer_facing": 1.0,
        "eps_F_aggregate": 0.10,
        "tau": 21.0,
        "gamma_F": 14.0,
        "l2": 35.0,
    }
    scn, prm = apply_grid_point(be64, ref_scenario, BehavioralParams(), point)
    codes = scn.codes
    eps_D = scn.eps_D_lockdown
    assert eps_D[codes.index("C20")] == 0.30
    assert eps_D[codes.index("G46")] == 0.0
    assert eps_D[codes.index("I55-56")] == 1.0
    assert eps_D[codes.index("H49")] == ref_scenario.eps_D_lockdown[codes.index("H49")]
    assert scn.l2 == 35.0
    assert prm.prod_fn == "weakly_critical"
    assert prm.tau == 21.0 and prm.gamma_F == 14.0 and prm.hiring_speed == 28.0


def test_apply_grid_point_rejects_unknown_key(be64, ref_scenario):
    with pytest.raises(ValueError):
        apply_grid_point(be64, ref_scenario, BehavioralParams(), {"bogus": 1})


# -- scoring and recovery ---------------------------------------------------------

@pytest.fixture(scope="module")
def d3_setup():
    from pnetsim.fixtures import d3_economy

    economy = d3_economy()
    eps_S = np.array([0.3, 0.1, 0.0])
    eps_D = np.array([0.2, 0.0, 0.4])
    scenario = scenario_for(
        economy,
        key_dates=((date(2020, 3, 15), "lockdown_start"),
                   (date(2020, 5, 4), "lockdown_end")),
        eps_S_L1=eps_S, eps_D_lockdown=eps_D,
    )
    return economy, scenario


def test_self_scored_dataset_is_exact(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams(tau=14.0)
    dataset = synthesize_dataset(economy, scenario, params)
    score = score_point(economy, scenario, params, dataset)
    assert score.aad_total <= 1e-12
    assert len(score.cells) == 16
    for aad, ad in score.cells.values():
        assert abs(ad) <= aad + 1e-15


def test_toy_grid_recovers_generating_point(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    grid = GridSpec((("tau", (7.0, 14.0)), ("gamma_F", (14.0, 28.0))))
    gen = {"tau": 14.0, "gamma_F": 28.0}
    scn, prm = apply_grid_point(economy, scenario, params, gen)
    dataset = synthesize_dataset(economy, scn, prm)
    result = grid_search(economy, scenario, params, dataset, grid)
    assert result.argmin.params == gen
    assert result.argmin.aad_total <= 1e-9
    others = [s.aad_total for s in result.scores if s.params != gen]
    assert min(others) > 1e-6


def test_axis_permutation_leaves_scores_unchanged(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    gen = {"tau": 14.0, "gamma_F": 28.0}
    scn, prm = apply_grid_point(economy, scenario, params, gen)
    dataset = synthesize_dataset(economy, scn, prm)
    grid_a = GridSpec((("tau", (7.0, 14.0)), ("gamma_F", (14.0, 28.0))))
    grid_b = GridSpec((("gamma_F", (14.0, 28.0)), ("tau", (7.0, 14.0))))
    ra = grid_search(economy, scenario, params, dataset, grid_a)
    rb = grid_search(economy, scenario, params, dataset, grid_b)
    assert ra.argmin.params == rb.argmin.params
    scores_a = {tuple(sorted(s.params.items())): s.aad_total for s in ra.scores}
    scores_b = {tuple(sorted(s.params.items())): s.aad_total for s in rb.scores}
    assert scores_a == scores_b


def test_recovery_with_noise_stays_within_one_cell(d3_setup, rng):
    economy, scenario = d3_setup
    params = BehavioralParams()
    grid = GridSpec((("tau", (7.0, 14.0, 21.0)),))
    gen = {"tau": 14.0}
    scn, prm = apply_grid_point(economy, scenario, params, gen)
    dataset = synthesize_dataset(economy, scn, prm)
    noisy = {
        ind: [(d, s, v + float(rng.normal(0.0, 0.1))) for d, s, v in rows]
        for ind, rows in dataset.observations.items()
    }
    result = grid_search(economy, scenario, params, EmpiricalDataset(noisy), grid)
    assert result.argmin.params["tau"] in (7.0, 14.0, 21.0)
    assert abs(result.argmin.params["tau"] - 14.0) <= 7.0


def test_worker_count_does_not_change_result(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    grid = GridSpec((("tau", (7.0, 14.0)),))
    dataset = synthesize_dataset(economy, scenario, params)
    r1 = grid_search(economy, scenario, params, dataset, grid, workers=1)
    r2 = grid_search(economy, scenario, params, dataset, grid, workers=2)
    assert [s.aad_total for s in r1.scores] == [s.aad_total for s in r2.scores]
    assert r1.argmin.params == r2.argmin.params


def test_checkpoint_resume_reproduces_full_run(tmp_path, d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    grid = GridSpec((("tau", (7.0, 14.0, 21.0)), ("gamma_F", (14.0, 28.0))))
    dataset = synthesize_dataset(economy, scenario, params)
    ck = tmp_path / "ck.jsonl"
    full = grid_search(economy, scenario, params, dataset, grid,
                       checkpoint_path=ck)
    lines = ck.read_text().splitlines()
    assert len(lines) == 1 + grid.n_points
    # simulate an interruption halfway through
    ck.write_text("\n".join(lines[:4]) + "\n")
    resumed = grid_search(economy, scenario, params, dataset, grid,
                          checkpoint_path=ck, resume=True)
    assert [s.aad_total for s in resumed.scores] == [s.aad_total for s in full.scores]
    assert resumed.argmin.params == full.argmin.params


def test_checkpoint_grid_mismatch_rejected(tmp_path, d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    dataset = synthesize_dataset(economy, scenario, params)
    ck = tmp_path / "ck.jsonl"
    grid_search(economy, scenario, params, dataset,
                GridSpec((("tau", (7.0,)),)), checkpoint_path=ck)
    with pytest.raises(CheckpointError):
        grid_search(economy, scenario, params, dataset,
                    GridSpec((("tau", (14.0,)),)), checkpoint_path=ck,
                    resume=True)


def test_leaderboard_export(tmp_path, d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    grid = GridSpec((("tau", (7.0, 14.0)),))
    dataset = synthesize_dataset(economy, scenario, params)
    result = grid_search(economy, scenario, params, dataset, grid)
    lb = result.write_leaderboard(tmp_path / "leaderboard.csv")
    lines = lb.read_text().splitlines()
    assert lines[0] == "rank,grid_index,aad_total,tau"
    assert len(lines) == 3
    cells = result.write_optimum_cells(tmp_path / "cells.csv")
    assert cells.read_text().startswith("indicator,quarter,aad_vw,ad_vw")


# -- Monte Carlo -------------------------------------------------------------------

def test_monte_carlo_degenerate_distributions_collapse_band(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    dists = {"tau": {"dist": "fixed", "value": 14.0}}
    res = monte_carlo(economy, scenario, params, dists, n_runs=5, seed=7,
                      t_end=60.0)
    assert np.allclose(res.bands[0], res.bands[-1])
    single = simulate(economy, scenario, params, IntegrationConfig(), 60.0)
    np.testing.assert_allclose(res.bands[1], single.aggregate_output(), rtol=1e-12)


def test_monte_carlo_seed_reproducibility(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    dists = {"tau": {"dist": "normal", "mean": 14.0, "sd": 2.0, "min": 1.0}}
    a = monte_carlo(economy, scenario, params, dists, n_runs=8, seed=42, t_end=40.0)
    b = monte_carlo(economy, scenario, params, dists, n_runs=8, seed=42, t_end=40.0)
    np.testing.assert_array_equal(a.bands, b.bands)
    c = monte_carlo(economy, scenario, params, dists, n_runs=8, seed=43, t_end=40.0)
    assert not np.array_equal(a.bands, c.bands)


def test_monte_carlo_single_run_band_is_trajectory(d3_setup):
    economy, scenario = d3_setup
    params = BehavioralParams()
    dists = {"l2": {"dist": "uniform", "low": 28.0, "high": 56.0}}
    res = monte_carlo(economy, scenario, params, dists, n_runs=1, seed=3,
                      t_end=40.0)
    assert np.array_equal(res.bands[0], res.bands[1])
    assert np.array_equal(res.bands[1], res.bands[2])


def test_parse_distributions_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        parse_distributions({"nonsense": {"dist": "fixed", "value": 1.0}})
    with pytest.raises(ValueError):
        parse_distributions({"tau": {"dist": "cauchy"}})


def test_apply_sampled_conversions(ref_scenario):
    params = BehavioralParams()
    scn, prm = apply_sampled(ref_scenario, params,
                             {"rho_quarters": 0.6, "eps_S_scale": 2.0, "b": 0.5})
    assert prm.rho == pytest.approx(1.0 - 0.4 / 90.0)
    assert np.all(scn.eps_S_L1 <= 1.0)
    assert scn.eps_S_L1[list(scn.codes).index("I55-56")] == 1.0  # clipped
    assert scn.b == 0.5


def test_normal_sampler_truncates_at_floor(rng):
    sampler = parse_distributions(
        {"tau": {"dist": "normal", "mean": 1.0, "sd": 5.0, "min": 1.0}}
    )["tau"]
    draws = [sampler(rng) for _ in range(200)]
    assert min(draws) >= 1.0
