import json

import numpy as np
import pytest

from csslab import gauge as G
from csslab.dynamics import (CNStepper, ParameterTrajectory, PicardError, RenormalizedEvolution, SolverConfig,
                             evolve_lab_frame, evolve_renormalized, step_lab_frame)
from csslab.grid import EquivariantField, build_grid
from csslab.profiles import ModulationState, ProfileFactory

from conftest import q_exact


@pytest.fixture(scope="module")
def g():
    return build_grid(60.0, 512, 512, 6.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(ds=0.0)
    with pytest.raises(ValueError):
        SolverConfig(picard_tol=1e-6)
    with pytest.raises(ValueError):
        SolverConfig(frame="rotating")
    assert SolverConfig(y_max=100.0, n_inner=64, n_outer=64).grid().n == 128


def test_ground_state_is_static():
    cfg = SolverConfig(s_max=1.0, record_every=10, y_max=400.0, n_inner=1024, n_outer=1024)
    grid = cfg.grid()
    u = EquivariantField(grid, q_exact(grid.r) + 0j, 0)
    traj, w = evolve_renormalized(u, cfg, grid)
    assert traj.meta["static"] and w is u
    assert np.allclose(traj.column("lam"), 1.0, rtol=1e-12)
    assert np.all(traj.column("b") == 0.0)


def test_cn_conserves_mass(g):
    u0 = EquivariantField(g, 0.8 * np.exp(-g.r**2 / 2) * (1 + 0.3j * g.r**2), 0)
    u, rec = evolve_lab_frame(u0, 1e-3, 50, record_every=25)
    mass = np.array([r[1] for r in rec])
    energy = np.array([r[2] for r in rec])
    assert np.max(np.abs(mass / mass[0] - 1)) < 1e-9
    assert np.max(np.abs(energy / energy[0] - 1)) < 1e-6
    assert len(rec) == 3


def test_q_is_stationary_in_lab_frame(g):
    q = EquivariantField(g, q_exact(g.r) + 0j, 0)
    u = step_lab_frame(q, 1e-2)
    assert np.max(np.abs(u.values - q.values)) < 1e-5


def test_picard_failure(g):
    st = CNStepper(g, 0, picard_min=3, picard_max=2)
    with pytest.raises(PicardError):
        st.step(np.exp(-g.r**2) + 0j, 1e-3)


def test_trajectory_export(tmp_path):
    tr = ParameterTrajectory(rows=[{"s": 0.0, "t": 0.0, "lam": 1.0, "b": 0.01, "flags": "11111"}], meta={"x": 1})
    tr.to_csv(tmp_path / "t.csv")
    tr.to_json(tmp_path / "t.json")
    head = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
    assert head[:3] == ["s", "t", "lam"] and head[-1] == "flags"
    assert json.loads((tmp_path / "t.json").read_text())["n_rows"] == 1
    assert len(tr) == 1 and tr.column("b")[0] == 0.01


def test_short_renormalized_run():
    cfg = SolverConfig(y_max=2000.0, n_inner=1024, n_outer=1024, s_max=0.4, record_every=10, ds=0.01)
    grid = cfg.grid()
    P = ProfileFactory(grid, check_extent=False).assemble(ModulationState(1.0, 0.0, 0.02, 0.0)).P
    traj = RenormalizedEvolution(cfg, grid).run(EquivariantField(grid, P, 0))
    assert not traj.truncated
    b = traj.column("b")
    assert np.all(np.diff(b) < 0)
    m = traj.column("mass")
    assert np.max(np.abs(m / m[0] - 1)) < 1e-7
    a = traj.column("lam_s_over_lam")
    assert np.max(np.abs(a[1:] + b[1:])) < 0.2 * 0.02**1.5
