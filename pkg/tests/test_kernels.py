import os
import subprocess
import sys

import numpy as np
import pytest

from trispin.spin_algebra import ModelParams
from trispin.trajectories import _decompose, _haar_state
from trispin._kernels import _mcwf_py

_mcwf_c = pytest.importorskip(
    "trispin._kernels._mcwf", reason="compiled kernel not built"
)


def drive(mod, p, master=12, n_events=400, t_max=np.inf):
    lam, v, vinv, ops, rates, _, tau0 = _decompose(p)
    rng = np.random.Generator(np.random.Philox(key=[master, 0]))
    psi = _haar_state(rng)
    uniforms = rng.random(2 * n_events)
    times = np.zeros(n_events)
    chans = np.zeros(n_events, dtype=np.int32)
    n, t_end, used, status = mod.advance(
        lam, v, vinv, ops, rates, psi, 0.0, uniforms,
        times, chans, n_events, t_max, 1e6, tau0,
    )
    return n, t_end, used, status, times[:n], chans[:n], psi


class TestBackendAgreement:
    def test_first_events_identical(self):
        # Identical inputs must give identical early histories; iterated
        # rounding makes later events diverge, which is expected.
        cases = (
            (ModelParams(nbar=1.0, gamma_single=5e-4, convention="halved"), 12),
            (ModelParams(nbar=0.0, convention="unhalved"), 2),
        )
        for p, master in cases:
            nc, tec, uc, sc, tc, cc, _ = drive(_mcwf_c, p, master=master)
            np_, tep, up, sp, tp, cp, _ = drive(_mcwf_py, p, master=master)
            assert sc == sp
            m = min(nc, np_, 50)
            assert m > 0
            assert (cc[:m] == cp[:m]).all()
            rel = np.max(np.abs(tc[:m] - tp[:m]) / (1.0 + tp[:m]))
            assert rel < 1e-9

    def test_trapped_state_agrees(self):
        # This draw has enough dissipation-free weight that the very first
        # threshold is unreachable: both backends must report the stall.
        p = ModelParams(nbar=5.0, convention="unhalved")
        nc, _, _, sc, _, _, _ = drive(_mcwf_c, p, master=12)
        np_, _, _, sp, _, _, _ = drive(_mcwf_py, p, master=12)
        assert (nc, sc) == (0, 3)
        assert (np_, sp) == (0, 3)

    def test_uniform_accounting(self):
        p = ModelParams(nbar=1.0, gamma_single=5e-4, convention="halved")
        nc, _, uc, _, _, _, _ = drive(_mcwf_c, p, n_events=100)
        np_, _, up, _, _, _, _ = drive(_mcwf_py, p, n_events=100)
        assert uc == up == 200  # exactly two uniforms per jump

    def test_t_max_stop(self):
        p = ModelParams(nbar=1.0, gamma_single=5e-4, convention="halved")
        for mod in (_mcwf_c, _mcwf_py):
            n, t_end, _, status, times, _, _ = drive(mod, p, t_max=200.0)
            assert status == 2
            assert t_end == 200.0
            assert times.size == 0 or times[-1] <= 200.0

    def test_no_systematic_waiting_time_bias(self):
        p = ModelParams(nbar=1.0, gamma_single=5e-4, convention="halved")
        _, _, _, _, tc, _, _ = drive(_mcwf_c, p, master=4, n_events=2000)
        _, _, _, _, tp, _, _ = drive(_mcwf_py, p, master=4, n_events=2000)
        mean_c = np.diff(tc).mean()
        mean_p = np.diff(tp).mean()
        assert abs(mean_c - mean_p) / mean_p < 0.1

    def test_post_jump_norms(self):
        p = ModelParams(nbar=2.0, gamma_single=5e-4, convention="halved")
        for mod in (_mcwf_c, _mcwf_py):
            _, _, _, _, _, _, psi = drive(mod, p, n_events=50)
            assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


class TestBackendSelection:
    def _backend_under_env(self, value):
        env = dict(os.environ, TRISPIN_MCWF_BACKEND=value)
        out = subprocess.run(
            [sys.executable, "-c",
             "from trispin._kernels import BACKEND; print(BACKEND)"],
            capture_output=True, text=True, env=env,
        )
        return out

    def test_forced_python(self):
        out = self._backend_under_env("python")
        assert out.returncode == 0
        assert out.stdout.strip() == "python"

    def test_forced_compiled(self):
        out = self._backend_under_env("compiled")
        assert out.returncode == 0
        assert out.stdout.strip() == "compiled"

    def test_unknown_value_rejected(self):
        out = self._backend_under_env("fortran")
        assert out.returncode != 0
        assert "TRISPIN_MCWF_BACKEND" in out.stderr
