"""Acceptance suite: one test per criterion, at its stated tolerance.

Each test prints one PASS line when its assertions hold (run with ``-s``
to see them). Runtime budgets are asserted after the session-level
kernel warm-up, so they measure the algorithms rather than JIT
compilation.

Two tests marked ``spec_value`` assert literally-quoted averaged-FIM
numbers that are internally inconsistent with the defining formulas (the
density-weighted average); they fail by design and the analysis lives in
the decisions ledger. Each is paired with an ``oracle`` test asserting
the same criterion's substance against independently computed quadrature
values at the same tolerance.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from prt.config import load_run_config
from prt.core import ParameterSpace, evaluate, scale_to_unit, scaled_view
from prt.errors import NotPeriodicError
from prt.models import (
    CELLCYCLE_NAMES,
    SIWR_DEFAULT_THETA,
    SIWR_FAST_XI_THETA,
    SIWR_NAMES,
    load_cellcycle_defaults,
    relative_box,
    siwr,
)
from prt.profiling import (
    chi2_threshold,
    classify_profile,
    profile_parameter,
    relationship_table,
)
from prt.reports import read_manifest, read_metadata
from prt.sensitivity import eigendecompose, jacobian_fd, local_sfim
from prt.subspace import GapAfterLargestRatio, average_sfim, low_rank_eval, partition, sample


class Budget:
    def __init__(self, seconds, label):
        self.seconds = seconds
        self.label = label

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.elapsed = time.perf_counter() - self.start
        if exc_type is None:
            assert self.elapsed < self.seconds, \
                f"{self.label}: {self.elapsed:.1f}s exceeded budget {self.seconds:.0f}s"
            print(f"[PASS] {self.label} ({self.elapsed:.2f}s)")
        return False


def quad_mean12(f, n_nodes=80):
    # independent quadrature oracle: density-weighted mean over [0,1]x[0,2]
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    t1, w1 = 0.5 * (xg + 1.0), 0.5 * wg
    t2, w2 = xg + 1.0, wg
    m1, m2 = np.meshgrid(t1, t2, indexing="ij")
    weights = np.outer(w1, w2)
    return float((weights * f(m1, m2)).sum() / 2.0)


BOX12 = ParameterSpace(("theta1", "theta2"), [0.0, 0.0], [1.0, 2.0])


class TestExample1LocalSfim:
    def test_eigenpair(self, model1):
        with Budget(1.0, "example1 local FIM eigenpair"):
            fim = local_sfim(jacobian_fd(model1, [0.3, 1.0]))
            eig = eigendecompose(fim.matrix)
            lam1_exact = 2.0 * math.exp(2.6)
            assert abs(eig.eigenvalues[0] - lam1_exact) <= 1e-6 * lam1_exact
            assert abs(eig.eigenvalues[1]) <= 1e-10 * eig.eigenvalues[0]
            v1 = eig.eigenvectors[:, 0]
            target = np.array([1.0, 1.0]) / np.sqrt(2.0)
            assert np.max(np.abs(v1 - target)) <= 1e-6


class TestExample1AverageSfim:
    @pytest.fixture(scope="class")
    def mc(self, model1):
        ss = sample(BOX12, "uniform-iid", 4000, seed=12345)
        return average_sfim(model1, ss), ss

    def test_oracle_value_and_surrogate(self, model1, mc):
        with Budget(5.0, "example1 averaged FIM vs quadrature + exact rank-1 surrogate"):
            avg, _ = mc
            truth = quad_mean12(lambda a, b: np.exp(2.0 * (a + b)))
            assert np.max(np.abs(avg.matrix / truth - 1.0)) < 0.05
            part = partition(avg.eig, GapAfterLargestRatio())
            assert part.r == 1
            worst = 0.0
            for a in np.linspace(0, 1, 50):
                for b in np.linspace(0, 2, 50):
                    f = evaluate(model1, [a, b])[0]
                    g = low_rank_eval(model1, part, [a, b])[0]
                    worst = max(worst, abs(g - f) / abs(f))
            assert worst < 1e-10

    @pytest.mark.spec_defect
    def test_spec_value(self, mc):
        # literal criterion: entries within 5% of 13.3995 = (e^4-1)/4. The
        # density-weighted average of exp(2(t1+t2)) over [0,1]x[0,2] is
        # ((e^2-1)/2)*((e^4-1)/4) = 42.8052, so this target is not attainable
        # by the defining formula; see the decisions ledger.
        avg, _ = mc
        target = (math.exp(4.0) - 1.0) / 4.0
        assert np.max(np.abs(avg.matrix / target - 1.0)) < 0.05, (
            "averaged-FIM entries differ from the quoted closed form by the "
            "dropped factor E[exp(2*theta1)] ~ 3.19; see decisions ledger")


class TestExample2AverageSfim:
    @pytest.fixture(scope="class")
    def mc(self, model2):
        ss = sample(BOX12, "lhs", 10000, seed=777)
        return average_sfim(model2, ss)

    def test_oracle_values(self, mc):
        with Budget(10.0, "example2 averaged FIM vs quadrature (entries, eigs, Q_a)"):
            avg = mc
            e = lambda a, b: np.exp(2.0 * a * b)
            truth = np.array([
                [quad_mean12(lambda a, b: b * b * e(a, b)),
                 quad_mean12(lambda a, b: a * b * e(a, b))],
                [quad_mean12(lambda a, b: a * b * e(a, b)),
                 quad_mean12(lambda a, b: a * a * e(a, b))]])
            assert np.max(np.abs(avg.matrix / truth - 1.0)) < 0.05
            lam_truth = np.linalg.eigvalsh(truth)[::-1]
            assert np.all(np.abs(avg.eig.eigenvalues / lam_truth - 1.0) < 0.05)
            part = partition(avg.eig, GapAfterLargestRatio())
            qa_truth = np.array([0.903673, 0.428222])  # natural parameter order
            assert np.linalg.norm(part.q_active[:, 0] - qa_truth) < 0.02

    @pytest.mark.spec_defect
    def test_spec_value(self, mc):
        # literal criterion: the quoted matrix/eigenpairs correspond to the
        # unweighted integral with the parameter order reversed; under the
        # defining density-weighted average in natural order they are not
        # attainable (entries differ by the volume factor 2 and a diagonal
        # swap). See the decisions ledger.
        avg = mc
        quoted = np.array([[4.89983, 8.9827], [8.9827, 19.5993]])
        entries_ok = np.max(np.abs(avg.matrix / quoted - 1.0)) < 0.05
        lam_ok = np.all(np.abs(avg.eig.eigenvalues / np.array([23.8559, 0.64321]) - 1.0)
                        < 0.05)
        part = partition(avg.eig, GapAfterLargestRatio())
        qa_ok = np.linalg.norm(part.q_active[:, 0] - np.array([0.428222, 0.903673])) < 0.02
        assert entries_ok and lam_ok and qa_ok, (
            "quoted averaged-FIM values are the unweighted, order-reversed "
            "integral; see decisions ledger")


class TestExample2Profile:
    def test_flat_profile_and_product_slope(self, model2):
        from prt.core import ModelOutputSpec, ParametricModel
        vec = ParametricModel(name="example2", n=2,
                              output_spec=ModelOutputSpec(kind="vector", m=1),
                              evaluator=model2.evaluator,
                              analytic_jacobian=model2.analytic_jacobian)
        with Budget(30.0, "example2 profile: cost <= 1e-8, log-log slope -1 +- 0.02"):
            grid = np.linspace(0.15, 0.45, 21)
            trace = profile_parameter(vec, np.array([0.3, 1.0]), 0, grid,
                                      bounds=(np.array([0.0, 0.0]),
                                              np.array([1.0, 3.0])))
            assert trace.n_success == grid.size
            assert np.max(trace.cost_min) <= 1e-8
            table = relationship_table(trace, names=["theta1", "theta2"])
            lx = np.asarray(table.column("log_theta1_star"))
            ly = np.asarray(table.column("log_theta2"))
            slope = np.polyfit(lx, ly, 1)[0]
            assert abs(slope - (-1.0)) <= 0.02


class TestExample3Eigenvalues:
    def test_both_points(self, model3):
        with Budget(1.0, "example3 eigenvalues at the two reference points"):
            # oracle values: eigvalsh of the closed-form FIM (matches the
            # quoted 3.91/5.80e-4 and 2.96/0.15 at their print precision)
            cases = {
                (1.95, 0.05): (3.90644901, 5.80469293e-04,
                               ((3.91, 0.01), (5.80e-4, 1e-6))),
                (0.05, 1.95): (2.96767527, 0.14723424,
                               ((2.96, 0.01), (0.15, 0.01))),
            }
            for theta, (lam1, lam2, printed) in cases.items():
                fim = local_sfim(jacobian_fd(model3, list(theta)))
                eig = eigendecompose(fim.matrix)
                assert abs(eig.eigenvalues[0] / lam1 - 1.0) < 0.01
                assert abs(eig.eigenvalues[1] / lam2 - 1.0) < 0.01
                # the quoted values are 2-3 significant digit prints (one of
                # them truncated); agree within one unit of their last digit
                for got, (quoted, unit) in zip(eig.eigenvalues, printed):
                    assert abs(got - quoted) <= unit, (theta, got, quoted)


class TestSiwrRankDrop:
    def test_rank_ladder(self):
        # fixed observation design (20 even points over the nominal-theta
        # epidemic) across all xi multipliers; relative (centered-unit box)
        # coordinates; rank tolerance fixed at 1e-8 and recorded here.
        rank_tolerance = 1e-8
        with Budget(120.0, "SIWR rank ladder 4 -> 3 -> 2 (tolerance 1e-8, recorded)"):
            base = SIWR_DEFAULT_THETA
            nominal = siwr(theta_hat=base, tolerances=(1e-11, 1e-13))
            obs = nominal.output_spec.observation_times
            ranks = {}
            for mult in (1.0, 1e2, 1e3, 1e4, 5000.0):
                theta = base.copy()
                theta[2] *= mult
                model = siwr(theta_hat=theta, observation_times=obs,
                             tolerances=(1e-11, 1e-13))
                space = relative_box(SIWR_NAMES, theta)
                scaled, _ = scaled_view(model, space)
                center = scale_to_unit(space, theta)
                fim = local_sfim(jacobian_fd(scaled, center, relative_step=1e-4))
                eig = eigendecompose(fim.matrix, rank_tolerance=rank_tolerance)
                ranks[mult] = eig.numerical_rank
            assert ranks[1.0] == 4, ranks
            assert ranks[5000.0] == 2, ranks
            scan = [ranks[m] for m in (1.0, 1e2, 1e3, 1e4)]
            assert 3 in scan, ranks
            assert sorted(scan, reverse=True) == scan, ranks  # monotone drop


class TestSiwrProfiles:
    def test_fast_xi_unidentifiable_and_slope(self):
        with Budget(600.0, "SIWR profiles: fast-xi flat with slope -1, normal-xi finite CI"):
            delta = chi2_threshold(0.05, 4)

            # fast-xi regime: beta_w profile flat, beta_i compensates 1:1
            theta_f = SIWR_FAST_XI_THETA
            model_f = siwr(theta_hat=theta_f)
            grid_f = np.linspace(0.65 * theta_f[1], 1.15 * theta_f[1], 21)
            lo = np.array([1e-4, 1e-4, theta_f[2] / 100.0, theta_f[3] / 100.0])
            hi = np.array([10.0, 10.0, theta_f[2] * 100.0, theta_f[3] * 100.0])
            trace_f = profile_parameter(model_f, theta_f, 1, grid_f,
                                        bounds=(lo, hi), seed=7)
            ci_f = classify_profile(trace_f, delta)
            assert ci_f.kind == "infinite" or ci_f.classification == "structurally_suspect"
            slope = np.polyfit(trace_f.grid, trace_f.argmin_others[:, 0], 1)[0]
            assert abs(slope - (-1.0)) <= 0.05

            # normal-xi regime: finite interval containing 1.21
            theta_n = SIWR_DEFAULT_THETA
            model_n = siwr(theta_hat=theta_n)
            grid_n = np.linspace(0.5 * theta_n[1], 1.5 * theta_n[1], 21)
            lo_n = theta_n / 100.0
            hi_n = theta_n * 100.0
            trace_n = profile_parameter(model_n, theta_n, 1, grid_n,
                                        bounds=(lo_n, hi_n), seed=7)
            ci_n = classify_profile(trace_n, delta)
            assert ci_n.kind == "finite"
            assert ci_n.classification == "identifiable"
            assert ci_n.lo < 1.21 < ci_n.hi


class TestSiwrFastXiAverage:
    def test_leading_eigenvector_structure(self):
        with Budget(600.0, "SIWR fast-xi averaged FIM eigenvector structure"):
            theta = SIWR_FAST_XI_THETA
            model = siwr(theta_hat=theta)
            space = relative_box(SIWR_NAMES, theta)
            ss = sample(space, "lhs", 500, seed=20260809)
            avg = average_sfim(model, ss, workers=4)
            v1 = avg.eig.eigenvectors[:, 0]
            v2 = avg.eig.eigenvectors[:, 1]
            k_index = SIWR_NAMES.index("k")
            assert abs(v1[k_index]) > 0.9
            bw, bi = SIWR_NAMES.index("beta_w"), SIWR_NAMES.index("beta_i")
            assert abs(v2[bw] - v2[bi]) < 0.2 * np.linalg.norm(v2)


class TestCellcycleProperties:
    def test_sampled_average_report(self, tmp_path):
        with Budget(1800.0, "cell-cycle sampled averaged FIM: PSD, deterministic, >=80% periodic"):
            from prt.cli import main
            out_a = tmp_path / "a"
            out_b = tmp_path / "b"
            cfg_path = tmp_path / "cc.cfg"
            cfg_path.write_text(
                "model = cellcycle\n"
                "qoi = period\n"
                "sampling.scheme = lhs\n"
                "sampling.n = 200\n"
                "sampling.seed = 4242\n"
                "fd_step = 1e-3\n"
                "summary.rows = 2\n",
                encoding="utf-8")
            assert main(["active", "--config", str(cfg_path), "--out", str(out_a)]) == 0
            assert main(["active", "--config", str(cfg_path), "--out", str(out_b),
                         "--workers", "4"]) == 0

            # deterministic, worker-count independent
            assert read_manifest(out_a / "manifest.txt") == \
                read_manifest(out_b / "manifest.txt")

            md = read_metadata(out_a / "metadata.kv")
            n_used = int(md["n_samples_used"])
            n_total = int(md["n_samples"])
            assert n_used + int(md["n_excluded"]) == n_total
            assert n_used >= 0.8 * n_total, md["exclusions"]

            from prt.reports import read_csv
            eig_table, _ = read_csv(out_a / "eigenvalues.csv")
            lam = np.array([row[1] for row in eig_table.rows])
            assert lam.size == 24
            assert np.all(np.diff(lam) <= 1e-12)
            assert np.all(lam >= -24 * np.finfo(float).eps * max(lam[0], 0.0))

            summary, _ = read_csv(out_a / "summary.csv")
            assert summary.headers == ("w1", "w2", "q")
            assert summary.n_rows == n_used


class TestCrossCuttingProperties:
    def test_fd_vs_analytic(self, model1, model2, model3):
        with Budget(60.0, "FD vs analytic Jacobians <= 1e-5 (100 points, examples 1-3)"):
            rng = np.random.default_rng(2024)
            for model in (model1, model2, model3):
                worst = 0.0
                for _ in range(100):
                    theta = rng.uniform([0.05, 0.05], [1.0, 1.9])
                    fd = jacobian_fd(model, theta).matrix
                    an = jacobian_fd(model, theta, method="analytic").matrix
                    worst = max(worst, np.max(np.abs(fd - an)) / np.max(np.abs(an)))
                assert worst <= 1e-5, model.name

    def test_rank_bound_and_orthogonality(self, model1, model2, model3):
        with Budget(60.0, "rank(F) <= m and Q^T Q = I on built-ins"):
            models = [(model1, [0.4, 0.9]), (model2, [0.4, 0.9]), (model3, [0.4, 0.9])]
            siwr_model = siwr()
            models.append((siwr_model, SIWR_DEFAULT_THETA))
            for model, theta in models:
                eig = eigendecompose(local_sfim(jacobian_fd(model, theta)).matrix)
                assert eig.numerical_rank <= model.m
                n = eig.eigenvalues.size
                assert np.max(np.abs(eig.eigenvectors.T @ eig.eigenvectors - np.eye(n))) \
                    <= 1e-10

    def test_partition_identity(self):
        with Budget(10.0, "Q_a Q_a^T + Q_i Q_i^T = I within 1e-10"):
            rng = np.random.default_rng(77)
            a = rng.standard_normal((8, 8))
            eig = eigendecompose(0.5 * (a + a.T))
            for r in (1, 3, 8):
                from prt.subspace import FixedR
                part = partition(eig, FixedR(r))
                ident = part.q_active @ part.q_active.T \
                    + part.q_inactive @ part.q_inactive.T
                assert np.max(np.abs(ident - np.eye(8))) <= 1e-10

    def test_siwr_conservation(self):
        with Budget(30.0, "SIWR S+I+R conservation within 10x solver tolerance"):
            from prt.models import SIWR_SYSTEM, _siwr_packed
            from prt.ode import integrate
            rtol, atol = 1e-8, 1e-10
            packed = _siwr_packed(SIWR_DEFAULT_THETA, 0.25, 25.0, 0.0)
            times = np.linspace(0.0, 250.0, 120)
            traj = integrate(SIWR_SYSTEM, packed, (0.0, 250.0), times,
                             tolerances=(rtol, atol))
            total = traj.states[:, :3].sum(axis=1)
            drift = np.max(np.abs(total - total[0]))
            assert drift <= 10 * (rtol + atol) * traj.solver_stats["steps"]

    def test_chi2_threshold_value(self):
        with Budget(5.0, "chi-square threshold (0.05, 1) = 1.92073 +- 1e-4"):
            assert abs(chi2_threshold(0.05, 1) - 1.92073) <= 1e-4

    def test_run_to_run_determinism(self, tmp_path):
        with Budget(120.0, "bitwise determinism for fixed seed and any worker count"):
            from prt.cli import main
            cfg_path = tmp_path / "d.cfg"
            cfg_path.write_text(
                "model = siwr\nsampling.n = 60\nsampling.seed = 31\n", encoding="utf-8")
            digests = []
            for run_dir, workers in ((tmp_path / "r1", "1"), (tmp_path / "r2", "1"),
                                     (tmp_path / "r3", "5")):
                assert main(["active", "--config", str(cfg_path), "--out", str(run_dir),
                             "--workers", workers]) == 0
                digests.append(tuple(read_manifest(run_dir / "manifest.txt")))
            assert digests[0] == digests[1] == digests[2]


class TestSecondaryAbsence:
    def test_primary_suite_independent_of_plot_component(self):
        # the plotting front end must not be importable as a dependency of prt
        import prt
        import prt.cli
        import sys as _sys
        assert not any(mod.startswith("prt_plot") for mod in _sys.modules)
        print("[PASS] primary component imports without the plot package")
