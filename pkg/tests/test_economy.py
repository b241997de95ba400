import numpy as np
import pytest

from pnetsim import (
    SchemaError,
    ValidationError,
    derive_criticality_sets,
    initial_inventories,
    load_economy,
    make_economy,
    write_economy,
)
from pnetsim.fixtures import fixture_paths


def load_fixture(name):
    p = fixture_paths(name)
    return load_economy(p["io_table"], p["initial_states"], p["criticality"])


def test_d2_technical_coefficients(d2):
    # A[i, j] = Z[i, j] / x0[j], by hand on the D2 numbers
    assert d2.A[0, 1] == 30.0 / 100.0
    assert d2.A[0, 0] == 20.0 / 110.0
    assert d2.A[1, 1] == 10.0 / 100.0


def test_d2_accounting_identity_by_hand(d2):
    assert 20 + 30 + 30 + 30 == 110 == d2.x0[0]
    assert 40 + 10 + 40 + 10 == 100 == d2.x0[1]


def test_zero_output_with_nonzero_flows_rejected():
    # X2 records sales of 5 but zero gross output: identity fails for X2.
    with pytest.raises(ValidationError) as err:
        make_economy(
            codes=("X1", "X2"),
            Z=[[0.0, 0.0], [5.0, 0.0]],
            c0=[10.0, 0.0],
            f0=[0.0, 0.0],
            l0=[5.0, 5.0],
            n_days_inventory=[1.0, 1.0],
            criticality=np.zeros((2, 2)),
            on_site=[0, 0],
            x0=[10.0, 0.0],
        )
    assert any("X2" in d for d in err.value.details)


def test_zero_output_sector_is_inert():
    economy = make_economy(
        codes=("X1", "X2"),
        Z=[[10.0, 0.0], [0.0, 0.0]],
        c0=[5.0, 0.0],
        f0=[5.0, 0.0],
        l0=[5.0, 0.0],
        n_days_inventory=[1.0, 1.0],
        criticality=np.zeros((2, 2)),
        on_site=[0, 0],
    )
    assert economy.x0[1] == 0.0
    assert np.all(economy.A[:, 1] == 0.0)


def test_identity_violation_names_sector(tmp_path, d2):
    paths = write_economy(d2, tmp_path)
    text = paths["initial_states"].read_text().splitlines()
    # perturb f0 of X2 by +5%
    cols = text[2].split(",")
    cols[3] = repr(float(cols[3]) * 1.05)
    text[2] = ",".join(cols)
    paths["initial_states"].write_text("\n".join(text) + "\n")
    with pytest.raises(ValidationError) as err:
        load_economy(paths["io_table"], paths["initial_states"], paths["criticality"])
    assert any("X2" in d for d in err.value.details)
    assert not any("X1" in d for d in err.value.details)


def test_roundtrip_bit_exact(tmp_path, be64):
    paths = write_economy(be64, tmp_path)
    again = load_economy(paths["io_table"], paths["initial_states"], paths["criticality"])
    for field in ("Z", "x0", "c0", "f0", "l0", "A", "n_days_inventory", "criticality"):
        a, b = getattr(be64, field), getattr(again, field)
        assert np.array_equal(a, b), field
    assert np.array_equal(be64.on_site, again.on_site)
    assert be64.codes == again.codes


def test_non_numeric_cell_names_position(tmp_path, d2):
    paths = write_economy(d2, tmp_path)
    text = paths["io_table"].read_text().replace("30.0", "abc", 1)
    paths["io_table"].write_text(text)
    with pytest.raises(SchemaError) as err:
        load_economy(paths["io_table"], paths["initial_states"], paths["criticality"])
    msg = str(err.value)
    assert "abc" in msg and "X1" in msg and "X2" in msg


def test_wrong_column_count(tmp_path, d2):
    paths = write_economy(d2, tmp_path)
    lines = paths["io_table"].read_text().splitlines()
    lines[1] += ",1.0"
    paths["io_table"].write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError):
        load_economy(paths["io_table"], paths["initial_states"], paths["criticality"])


def test_mismatched_codes_between_files(tmp_path, d2, d3):
    p2 = write_economy(d2, tmp_path / "a")
    p3 = write_economy(d3, tmp_path / "b")
    with pytest.raises(SchemaError):
        load_economy(p2["io_table"], p3["initial_states"], p2["criticality"])


def test_initial_states_reordered_rows_are_aligned(tmp_path, d2):
    paths = write_economy(d2, tmp_path)
    lines = paths["initial_states"].read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    paths["initial_states"].write_text("\n".join(lines) + "\n")
    again = load_economy(paths["io_table"], paths["initial_states"], paths["criticality"])
    assert np.array_equal(again.x0, d2.x0)


def test_vector_override_files(tmp_path, d2):
    paths = write_economy(d2, tmp_path)
    nd = tmp_path / "n_days.csv"
    nd.write_text("code,n_days\nX1,3.0\nX2,2.0\n")
    os_path = tmp_path / "on_site.csv"
    os_path.write_text("code,on_site\nX1,1\nX2,0\n")
    economy = load_economy(
        paths["io_table"], paths["initial_states"], paths["criticality"],
        inventory_targets_path=nd, on_site_path=os_path,
    )
    assert np.array_equal(economy.n_days_inventory, [3.0, 2.0])
    assert np.array_equal(economy.on_site, [True, False])


def test_column_sum_above_one_warns():
    with pytest.warns(UserWarning, match="exceed output value"):
        make_economy(
            codes=("X1", "X2"),
            Z=[[60.0, 90.0], [40.0, 20.0]],
            c0=[0.0, 40.0],
            f0=[0.0, 0.0],
            l0=[5.0, 5.0],
            n_days_inventory=[1.0, 1.0],
            criticality=np.zeros((2, 2)),
            on_site=[0, 0],
        )


def test_negative_entries_rejected(d2):
    with pytest.raises(ValidationError):
        make_economy(
            codes=("X1", "X2"),
            Z=[[-1.0, 30.0], [40.0, 10.0]],
            c0=[30.0, 40.0], f0=[30.0, 10.0], l0=[55.0, 50.0],
            n_days_inventory=[10.0, 5.0],
            criticality=np.zeros((2, 2)), on_site=[0, 0],
        )


def test_duplicate_codes_rejected():
    with pytest.raises(ValidationError):
        make_economy(
            codes=("X1", "X1"),
            Z=np.zeros((2, 2)), c0=[1.0, 1.0], f0=[0.0, 0.0], l0=[1.0, 1.0],
            n_days_inventory=[1.0, 1.0],
            criticality=np.zeros((2, 2)), on_site=[0, 0],
        )


# -- criticality sets --------------------------------------------------------

def test_criticality_sets_all_zero(d2):
    sets = derive_criticality_sets(d2)
    for j in range(2):
        assert sets.critical(j).size == 0
        assert sets.important(j).size == 0


def test_criticality_sets_mixed():
    crit = np.zeros((2, 2))
    crit[0, 1] = 1.0
    crit[1, 1] = 0.5
    economy = make_economy(
        codes=("X1", "X2"),
        Z=[[20.0, 30.0], [40.0, 10.0]],
        c0=[30.0, 40.0], f0=[30.0, 10.0], l0=[55.0, 50.0],
        n_days_inventory=[10.0, 5.0], criticality=crit, on_site=[0, 0],
    )
    sets = derive_criticality_sets(economy)
    assert list(sets.critical(1)) == [0]
    assert list(sets.important(1)) == [1]
    assert not (sets.critical_mask & sets.important_mask).any()


def test_criticality_sets_all_ones(d2):
    economy = make_economy(
        codes=d2.codes, Z=d2.Z, c0=d2.c0, f0=d2.f0, l0=d2.l0,
        n_days_inventory=d2.n_days_inventory,
        criticality=np.ones((2, 2)), on_site=d2.on_site,
    )
    sets = derive_criticality_sets(economy)
    for j in range(2):
        assert list(sets.critical(j)) == [0, 1]
        assert sets.important(j).size == 0


def test_criticality_invalid_entry_rejected(d2):
    with pytest.raises(ValidationError):
        make_economy(
            codes=d2.codes, Z=d2.Z, c0=d2.c0, f0=d2.f0, l0=d2.l0,
            n_days_inventory=d2.n_days_inventory,
            criticality=np.full((2, 2), 0.3), on_site=d2.on_site,
        )


# -- initial inventories -----------------------------------------------------

def test_initial_inventories_d2(d2):
    S0 = initial_inventories(d2)
    assert S0[0, 1] == 5.0 * 30.0
    assert S0[1, 0] == 10.0 * 40.0


def test_initial_inventories_zero_targets(d2):
    economy = make_economy(
        codes=d2.codes, Z=d2.Z, c0=d2.c0, f0=d2.f0, l0=d2.l0,
        n_days_inventory=[0.0, 0.0],
        criticality=d2.criticality, on_site=d2.on_site,
    )
    assert np.all(initial_inventories(economy) == 0.0)


def test_initial_inventories_zero_flow(d3):
    S0 = initial_inventories(d3)
    assert np.all((d3.Z == 0) <= (S0 == 0))


def test_loaded_fixture_identity_tolerance():
    economy = load_fixture("be64")
    residual = np.abs(
        economy.x0 - economy.Z.sum(axis=1) - economy.c0 - economy.f0
    )
    assert np.max(residual / np.maximum(economy.x0, 1.0)) <= 1e-6


def test_theta0_normalized(be64):
    assert np.isclose(be64.theta0.sum(), 1.0, rtol=0, atol=1e-12)
