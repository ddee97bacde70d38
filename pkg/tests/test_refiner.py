import numpy as np
import pytest

from conftest import make_scenario
from kinoplan import bvp
from kinoplan.grid import Box, build_grid
from kinoplan.refiner import (
    RefineKernel,
    RefineProblem,
    ScheduleParams,
    SingularSystemError,
    acceleration_gap_cost,
    build_Qc,
    build_Qh,
    build_Qs,
    check_feasible,
    closed_form_solve,
    deriv_row,
    endpoint_derivative_matrix,
    endpoint_derivatives,
    mapping_matrix,
    refine,
    weights_from_ratios,
)
from kinoplan.trajectory import PolySegment, State, Trajectory

PARAMS = bvp.PlannerParams(rho=1.0, v_max=5.0, a_max=6.0)


def zigzag_trajectory(scale=1.0):
    """Three-segment rest-to-rest zigzag: C1 joints, big acceleration gaps."""
    pts = [
        State([1.0, 1.0, 1.0], [0, 0, 0]),
        State([3.0, 2.5, 1.2], [0, 0, 0]),
        State([5.0, 1.0, 1.4], [0, 0, 0]),
        State([7.0, 2.5, 1.0], [0, 0, 0]),
    ]
    segs = []
    for a, b in zip(pts, pts[1:]):
        b_scaled = State(a.p + (b.p - a.p) * scale, b.v)
        segs.append(bvp.fixed_time_connect(a, b_scaled, 2.0).segment)
        pts[pts.index(b)] = b_scaled
    return Trajectory(tuple(segs))


def random_trajectory(rng, m=3):
    """Random C1 piecewise cubic built from optimal connections."""
    states = [State(rng.uniform(0, 8, 3), rng.uniform(-1.5, 1.5, 3))]
    for _ in range(m):
        states.append(State(states[-1].p + rng.uniform(-3, 3, 3), rng.uniform(-1.5, 1.5, 3)))
    segs = [
        bvp.fixed_time_connect(a, b, float(rng.uniform(1.0, 3.0))).segment
        for a, b in zip(states, states[1:])
    ]
    return Trajectory(tuple(segs))


class TestGramMatrices:
    def test_qs_known_entries(self):
        q = build_Qs([1.0], 5, 3)
        assert q[3, 3] == pytest.approx(36.0)  # (3!)^2 * 1
        assert q[4, 4] == pytest.approx(192.0)  # (24)^2 / 3

    def test_qs_symbolic_oracle(self):
        # independent oracle: numerically integrate basis derivative products
        rng = np.random.default_rng(0)
        T = 1.7
        q = build_Qs([T], 5, 3)
        ts = np.linspace(0, T, 20001)
        for a in range(6):
            for b in range(6):
                da = np.zeros(6)
                da[a] = 1.0
                db = np.zeros(6)
                db[b] = 1.0
                fa = np.polyval(np.polyder(da[::-1], 3), ts)
                fb = np.polyval(np.polyder(db[::-1], 3), ts)
                oracle = np.trapezoid(fa * fb, ts)
                assert q[a, b] == pytest.approx(oracle, rel=1e-6, abs=1e-9)

    def test_order_above_degree_gives_zero_block(self):
        assert not build_Qs([1.0, 2.0], 3, 4).any()

    def test_qs_blocks_psd_random_durations(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            times = rng.uniform(0.05, 4.0, size=rng.integers(1, 4))
            q = build_Qs(times, 5, 3)
            assert np.linalg.eigvalsh((q + q.T) / 2).min() >= -1e-10

    def test_qh_hilbert_entries(self):
        q = build_Qh([1.0], 5)
        for a in range(6):
            for b in range(6):
                assert q[a, b] == pytest.approx(1.0 / (a + b + 1))

    def test_qh_vanishing_interval(self):
        q = build_Qh([1e-12], 5)
        assert np.abs(q).max() < 1e-11

    def test_qh_zero_difference_costs_nothing(self):
        rng = np.random.default_rng(2)
        q = build_Qh([1.3, 0.7], 5)
        c = rng.normal(size=12)
        diff = c - c
        assert diff @ q @ diff == 0.0

    def test_qc_single_segment_is_zero(self):
        assert not build_Qc([2.0], 5).any()

    def test_qc_matching_accelerations_cost_zero(self):
        # two segments with analytically equal boundary accelerations
        x0 = State([0, 0, 0], [0, 0, 0])
        x1 = State([1, 0, 0], [1, 0, 0])
        s1 = bvp.fixed_time_connect(x0, x1, 1.0).segment
        a_end = s1.eval(1.0, 2)
        # quadratic continuation with the same starting acceleration
        c2 = np.zeros((3, 4))
        c2[:, 0] = s1.eval(1.0)
        c2[:, 1] = s1.eval(1.0, 1)
        c2[:, 2] = a_end / 2.0
        s2 = PolySegment(c2, 1.0)
        q = build_Qc([1.0, 1.0], 3)
        c = np.hstack([s1.coeffs, s2.coeffs])
        for axis in range(3):
            assert c[axis] @ q @ c[axis] == pytest.approx(0.0, abs=1e-18)

    def test_qc_random_cubics_match_direct_evaluation(self):
        rng = np.random.default_rng(3)
        t1, t2 = 1.3, 0.8
        q = build_Qc([t1, t2], 3)
        for _ in range(50):
            s1 = PolySegment(rng.normal(0, 1, (3, 4)), t1)
            s2 = PolySegment(rng.normal(0, 1, (3, 4)), t2)
            c = np.hstack([s1.coeffs, s2.coeffs])
            gap = s1.eval(t1, 2) - s2.eval(0.0, 2)
            for axis in range(3):
                assert c[axis] @ q @ c[axis] == pytest.approx(gap[axis] ** 2, rel=1e-9, abs=1e-12)


class TestMappingMatrix:
    def test_single_segment_parabola_identity(self):
        k = mapping_matrix([1.0], 5)
        d = np.array([0.0, 0.0, 2.0, 1.0, 2.0, 2.0])  # p0 v0 a0 p1 v1 a1
        c = k @ d
        assert np.allclose(c, [0, 0, 1, 0, 0, 0], atol=1e-9)  # p(t) = t^2

    def test_round_trip_reproduces_derivatives(self):
        rng = np.random.default_rng(4)
        times = [1.2, 0.7, 2.1]
        k = mapping_matrix(times, 5)
        a = endpoint_derivative_matrix(times, 5)
        for _ in range(20):
            d = rng.normal(size=k.shape[1])
            slots = a @ (k @ d)
            # fixed block: slots of segment 0 start and segment 2 end
            assert np.allclose(slots[0:3], d[0:3], atol=1e-9)
            assert np.allclose(slots[15:18], d[3:6], atol=1e-9)
            # joints: shared position/velocity, split accelerations
            for joint in range(2):
                base = 6 + 4 * joint
                end_slot = joint * 6 + 3
                start_slot = (joint + 1) * 6
                assert slots[end_slot] == pytest.approx(d[base], abs=1e-9)
                assert slots[start_slot] == pytest.approx(d[base], abs=1e-9)
                assert slots[end_slot + 1] == pytest.approx(d[base + 1], abs=1e-9)
                assert slots[start_slot + 1] == pytest.approx(d[base + 1], abs=1e-9)
                assert slots[end_slot + 2] == pytest.approx(d[base + 2], abs=1e-9)
                assert slots[start_slot + 2] == pytest.approx(d[base + 3], abs=1e-9)

    def test_assembled_trajectory_c1_for_any_free_derivatives(self):
        rng = np.random.default_rng(5)
        traj = random_trajectory(rng, m=2)
        kernel = RefineKernel(traj)
        for _ in range(10):
            d_p = rng.normal(size=(3, kernel.n_free))
            out = kernel.assemble(d_p)  # Trajectory validates C0/C1 at joints
            j = out.segments[0]
            assert np.allclose(
                j.eval(j.duration), out.segments[1].eval(0.0), atol=1e-6
            )

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            mapping_matrix([1.0, 0.0], 5)

    def test_wrong_degree_rejected(self):
        with pytest.raises(ValueError):
            mapping_matrix([1.0], 4)


class TestClosedFormSolve:
    def test_pure_homotopy_reproduces_original(self):
        rng = np.random.default_rng(6)
        traj = random_trajectory(rng, m=3)
        out = closed_form_solve(RefineProblem(traj, (0.0, 1.0, 0.0)))
        ts = np.linspace(0, traj.total_duration, 200)
        for t in ts:
            a, _ = traj.state_at(t)
            b, _ = out.state_at(t)
            assert np.allclose(a.p, b.p, atol=1e-8)

    def test_perturbation_never_improves(self):
        rng = np.random.default_rng(7)
        traj = random_trajectory(rng, m=3)
        lam = (0.3, 0.5, 0.2)
        kernel = RefineKernel(traj)
        d_p = kernel.solve_dp(lam)
        j0 = kernel.objective(d_p, lam)
        for _ in range(200):
            delta = rng.normal(size=d_p.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            assert kernel.objective(d_p + delta, lam) >= j0 - 1e-10

    def test_gradient_residual_small(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            traj = random_trajectory(rng, m=int(rng.integers(2, 5)))
            lam = tuple(np.random.default_rng(1).dirichlet([1, 1, 1]))
            kernel = RefineKernel(traj)
            d_p = kernel.solve_dp(lam)
            assert np.abs(kernel.gradient(d_p, lam)).max() <= 1e-8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        traj = random_trajectory(rng, m=2)
        lam = (0.25, 0.5, 0.25)
        kernel = RefineKernel(traj)
        d_p = rng.normal(size=(3, kernel.n_free))
        g = kernel.gradient(d_p, lam)
        h = 1e-6
        for axis in range(3):
            for i in range(kernel.n_free):
                dp = d_p.copy()
                dp[axis, i] += h
                jp = kernel.objective(dp, lam)
                dp[axis, i] -= 2 * h
                jm = kernel.objective(dp, lam)
                fd = (jp - jm) / (2 * h)
                assert g[axis, i] == pytest.approx(fd, rel=1e-4, abs=1e-5)

    def test_singular_system_raises(self):
        rng = np.random.default_rng(10)
        traj = random_trajectory(rng, m=3)
        kernel = RefineKernel(traj)
        with pytest.raises(SingularSystemError):
            kernel.solve_dp((0.0, 0.0, 1.0))  # pure continuity: massive null space

    def test_endpoints_pinned(self):
        rng = np.random.default_rng(11)
        traj = random_trajectory(rng, m=3)
        out = closed_form_solve(RefineProblem(traj, (0.5, 0.3, 0.2)))
        assert np.allclose(endpoint_derivatives(out), endpoint_derivatives(traj), atol=1e-8)

    def test_invalid_weights_rejected(self):
        rng = np.random.default_rng(12)
        traj = random_trajectory(rng, m=2)
        with pytest.raises(ValueError):
            RefineProblem(traj, (0.5, 0.3, 0.4))


class TestWeightsFromRatios:
    def test_ratio_definitions_hold(self):
        for rc in (0.99, 0.5, 0.05):
            for rh in (0.99, 0.5, 0.05):
                lam_s, lam_h, lam_c = weights_from_ratios(rc, rh)
                assert lam_s + lam_h + lam_c == pytest.approx(1.0)
                assert lam_c / (lam_s + lam_h + lam_c) == pytest.approx(rc)
                assert lam_h / (lam_s + lam_h) == pytest.approx(rh)

    def test_negative_ratio_clamped(self):
        lam_s, lam_h, lam_c = weights_from_ratios(-0.01, 0.5)
        assert lam_c == 0.0 and lam_s >= 0.0 and lam_h >= 0.0


class TestCheckFeasible:
    def test_frontend_output_accepted(self):
        grid = build_grid(make_scenario((10, 10, 3)), 0.1, 0.0)
        traj = zigzag_trajectory()
        assert check_feasible(traj, grid, PARAMS)

    def test_amplitude_blowup_rejected_by_limits(self):
        grid = build_grid(make_scenario((1000, 1000, 300)), 2.0, 0.0)
        big = zigzag_trajectory(scale=100.0)
        assert not check_feasible(big, grid, PARAMS)

    def test_occupied_cell_rejected(self):
        wall = Box([3.5, 0.0, 0.0], [4.5, 10.0, 3.0])
        grid = build_grid(make_scenario((10, 10, 3), [wall]), 0.1, 0.0)
        traj = zigzag_trajectory()
        assert not check_feasible(traj, grid, PARAMS)


class TestRefine:
    def test_free_space_reduces_gap_and_stays_feasible(self):
        grid = build_grid(make_scenario((10, 10, 3)), 0.1, 0.0)
        traj = zigzag_trajectory()
        out = refine(traj, grid, PARAMS)
        assert check_feasible(out, grid, PARAMS)
        assert acceleration_gap_cost(out) < acceleration_gap_cost(traj)
        assert out.total_duration == traj.total_duration

    def test_single_segment_kept_smooth(self):
        grid = build_grid(make_scenario((10, 10, 3)), 0.1, 0.0)
        seg = bvp.fixed_time_connect(
            State([1, 1, 1], [0, 0, 0]), State([4, 4, 1.5], [0, 0, 0]), 3.0
        ).segment
        traj = Trajectory((seg,))
        from kinoplan.metrics import jerk_integral

        out = refine(traj, grid, PARAMS)
        assert check_feasible(out, grid, PARAMS)
        assert jerk_integral(out) <= jerk_integral(traj) + 1e-9

    def test_narrow_gap_output_collision_free(self):
        wall = Box([4.6, 0.0, 0.0], [5.4, 8.0, 3.0])
        sc = make_scenario((10, 10, 3), [wall])
        grid = build_grid(sc, 0.1, 0.2)
        from kinoplan.rrt import Budget, plan
        from kinoplan.topo import SamplerParams, build_topo_graph, make_guided_sampler

        graph = build_topo_graph(grid, sc.start, sc.goal, PARAMS.rho)
        sampler = make_guided_sampler(graph, grid, SamplerParams())
        result = plan(grid, sc.start, sc.goal, PARAMS, sampler, Budget(3000, 5.0), seed=5)
        assert result.success
        out = refine(result.trajectory, grid, PARAMS)
        assert check_feasible(out, grid, PARAMS)

    def test_endpoint_states_exact(self):
        grid = build_grid(make_scenario((10, 10, 3)), 0.1, 0.0)
        traj = zigzag_trajectory()
        out = refine(traj, grid, PARAMS)
        assert np.allclose(endpoint_derivatives(out), endpoint_derivatives(traj), atol=1e-8)
        assert [s.duration for s in out.segments] == [s.duration for s in traj.segments]

    def test_infeasible_input_rejected(self):
        wall = Box([3.5, 0.0, 0.0], [4.5, 10.0, 3.0])
        grid = build_grid(make_scenario((10, 10, 3), [wall]), 0.1, 0.0)
        with pytest.raises(ValueError):
            refine(zigzag_trajectory(), grid, PARAMS)

    def test_homotopy_distance_monotone_across_loop2(self):
        grid = build_grid(make_scenario((10, 10, 3)), 0.1, 0.0)
        traj = zigzag_trajectory()
        trace = []
        refine(traj, grid, PARAMS, trace=trace)
        # loop-2 iterates: r_h strictly below its initial value
        loop2 = [(rh, cand) for _, rh, cand, ok in trace if ok and rh < 0.99 - 1e-12]
        assert len(loop2) >= 2
        ts = np.linspace(0, traj.total_duration, 400)
        base = np.vstack([traj.state_at(t)[0].p for t in ts])

        def deviation(cand):
            pts = np.vstack([cand.state_at(t)[0].p for t in ts])
            return float(np.linalg.norm(pts - base, axis=1).max())

        devs = [deviation(c) for _, c in loop2]
        assert all(d2 >= d1 - 1e-9 for d1, d2 in zip(devs, devs[1:]))

    def test_gap_never_worse_than_input(self):
        rng = np.random.default_rng(14)
        grid = build_grid(make_scenario((12, 12, 3)), 0.1, 0.0)
        for _ in range(5):
            traj = random_trajectory(rng, m=3)
            if not check_feasible(traj, grid, PARAMS):
                continue
            out = refine(traj, grid, PARAMS)
            assert acceleration_gap_cost(out) <= acceleration_gap_cost(traj) * (1 + 1e-9) + 1e-12

    def test_axis_separability(self):
        # joint block-diagonal solve equals the per-axis solves
        rng = np.random.default_rng(15)
        for _ in range(5):
            traj = random_trajectory(rng, m=3)
            lam = (0.3, 0.5, 0.2)
            kernel = RefineKernel(traj)
            d_p = kernel.solve_dp(lam)
            r = lam[0] * kernel.Rs + lam[1] * kernel.Rh + lam[2] * kernel.Rc
            nf = 6
            r_pp, r_pf = r[nf:, nf:], r[nf:, :nf]
            n_free = kernel.n_free
            big = np.kron(np.eye(3), r_pp)
            rhs = np.concatenate([
                lam[1] * kernel.Z[a, nf:] - r_pf @ kernel.d_f[a] for a in range(3)
            ])
            joint = np.linalg.solve(big, rhs).reshape(3, n_free)
            assert np.allclose(joint, d_p, atol=1e-10)

    def test_schedule_params_validated(self):
        with pytest.raises(ValueError):
            ScheduleParams(r_c_init=1.0)
        with pytest.raises(ValueError):
            ScheduleParams(d_rh=0.0)


class TestDerivRow:
    def test_matches_polynomial_derivative(self):
        rng = np.random.default_rng(16)
        c = rng.normal(size=6)
        for order in range(4):
            row = deriv_row(5, 1.3, order)
            from numpy.polynomial import polynomial as P

            assert row @ c == pytest.approx(P.polyval(1.3, P.polyder(c, m=order)))
