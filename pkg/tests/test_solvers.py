"""Solver loop tests: trivial cases, oracle agreement, flows, resources."""

import math
from dataclasses import replace

import numpy as np
import pytest

from qpflow import cases, hhl, network, solvers


def zero_load_case():
    return network.NetworkCase(
        "idle", 100.0,
        (network.Bus(1, "slack", vset=1.0), network.Bus(2, "pq")),
        (network.Branch(1, 2, 0.0, 0.1),),
    )


def stressed_five_bus(mult):
    case = cases.five_bus()
    i = case.bus_index(5)  # bus 5 carries the largest load
    bus = replace(case.buses[i], pd=case.buses[i].pd * mult, qd=case.buses[i].qd * mult)
    return replace(case, buses=case.buses[:i] + (bus,) + case.buses[i + 1 :])


class TestTrivialCases:
    @pytest.mark.parametrize(
        "solve",
        [solvers.solve_qpf, solvers.solve_fast_decoupled, solvers.solve_newton],
    )
    def test_zero_load_converges_in_one_iteration(self, solve):
        report = solve(zero_load_case())
        assert report.converged
        assert report.iterations == 1
        assert np.allclose(report.v, 1.0)
        assert np.allclose(report.theta, 0.0)

    def test_max_iterations_exhausted_is_report_not_error(self):
        report = solvers.solve_fast_decoupled(
            cases.five_bus(), solvers.SolverConfig(max_iterations=1)
        )
        assert not report.converged
        assert report.iterations == 1

    def test_newton_non_converged_report(self):
        report = solvers.solve_newton(
            cases.five_bus(), solvers.SolverConfig(method="nr", max_iterations=1)
        )
        assert not report.converged

    def test_divergent_case_reports_collapse(self):
        report = solvers.solve_fast_decoupled(stressed_five_bus(6.0))
        assert not report.converged
        assert any("collapsed" in w for w in report.warnings)


class TestOracleAgreement:
    def test_qpf_trace_matches_fast_decoupled(self):
        case = cases.five_bus()
        qpf = solvers.solve_qpf(case)
        fd = solvers.solve_fast_decoupled(case)
        assert qpf.converged and fd.converged
        assert qpf.iterations == fd.iterations
        for rq, rf in zip(qpf.trace, fd.trace):
            assert np.abs(rq.v - rf.v).max() <= 1e-3
            assert np.abs(rq.theta - rf.theta).max() <= 1e-3

    def test_all_methods_agree_on_bundled_cases(self):
        for name in ("two_bus", "five_bus", "chain_2", "chain_4"):
            case = cases.load(name)
            fd = solvers.solve_fast_decoupled(case)
            nr = solvers.solve_newton(case)
            assert fd.converged and nr.converged
            assert np.abs(fd.v - nr.v).max() <= 1e-3
            assert np.abs(fd.theta - nr.theta).max() <= 1e-3

    def test_newton_needs_no_more_iterations(self):
        case = cases.five_bus()
        fd = solvers.solve_fast_decoupled(case)
        nr = solvers.solve_newton(case)
        assert nr.iterations <= fd.iterations

    def test_converged_report_has_small_recomputed_mismatch(self):
        case = cases.five_bus()
        for report in (solvers.solve_fast_decoupled(case), solvers.solve_newton(case)):
            mis = network.compute_mismatch(case, report.v, report.theta)
            assert mis.norm_p < report.tolerance
            assert mis.norm_q < report.tolerance

    def test_stressed_iterations_increase_for_both(self):
        counts_fd = []
        counts_qpf = []
        for mult in (4.0, 4.6, 5.0):
            case = stressed_five_bus(mult)
            fd = solvers.solve_fast_decoupled(case)
            qpf = solvers.solve_qpf(case)
            assert fd.converged and qpf.converged
            counts_fd.append(fd.iterations)
            counts_qpf.append(qpf.iterations)
        assert counts_fd == counts_qpf
        assert counts_fd[0] < counts_fd[1] < counts_fd[2]


class TestQuantumBookkeeping:
    def test_first_iteration_only_preparation(self):
        report = solvers.solve_qpf(cases.five_bus())
        res = report.resource
        assert res.hhl_invocations == 2 * report.iterations
        assert res.prepare_reuse == 2 * (report.iterations - 1)

    def test_success_probabilities_recorded(self):
        report = solvers.solve_qpf(cases.five_bus())
        for rec in report.trace:
            assert len(rec.hhl_success) == 2
            for p in rec.hhl_success:
                assert 0.0 < p <= 1.0

    def test_precision_warning_propagates(self):
        config = solvers.SolverConfig(method="qpf", hhl=hhl.HHLConfig(n_clock=2))
        with pytest.warns(hhl.PrecisionWarning):
            report = solvers.solve_qpf(cases.five_bus(), config)
        assert any("cannot all be distinctly encoded" in w for w in report.warnings)

    def test_pv_only_case_skips_magnitude_system(self):
        case = network.NetworkCase(
            "pv_only", 100.0,
            (network.Bus(1, "slack"), network.Bus(2, "pv", pg=0.2, vset=1.0)),
            (network.Branch(1, 2, 0.0, 0.2),),
        )
        report = solvers.solve_qpf(case)
        assert report.converged
        assert report.resource.hhl_invocations == report.iterations


class TestBranchFlows:
    def test_zero_load_no_flow(self):
        report = solvers.solve_fast_decoupled(zero_load_case())
        for flow in report.flows:
            assert flow.p_from == pytest.approx(0.0, abs=1e-12)
            assert flow.q_from == pytest.approx(0.0, abs=1e-12)

    def test_two_bus_hand_formulas(self):
        case = network.NetworkCase(
            "two_bus", 100.0,
            (network.Bus(1, "slack", vset=1.0), network.Bus(2, "pq", pd=0.1, qd=0.05)),
            (network.Branch(1, 2, 0.0, 0.1),),
        )
        report = solvers.solve_newton(case, solvers.SolverConfig(method="nr", tolerance=1e-12))
        v1, v2 = report.v
        d = report.theta[1] - report.theta[0]
        b = 10.0  # 1/x
        flow = report.flows[0]
        assert flow.p_from == pytest.approx(v1 * v2 * b * math.sin(-d), abs=1e-10)
        assert flow.q_from == pytest.approx(v1 * v1 * b - v1 * v2 * b * math.cos(d), abs=1e-10)
        assert flow.p_to == pytest.approx(-0.1, abs=1e-9)

    def test_power_balance_bookkeeping(self):
        case = cases.five_bus()
        report = solvers.solve_newton(case, solvers.SolverConfig(method="nr", tolerance=1e-10))
        vc = report.v * np.exp(1j * report.theta)
        injections = vc * np.conj(network.build_ybus(case) @ vc)
        shunts = sum(complex(b.gs, -b.bs) * abs(vc[i]) ** 2 for i, b in enumerate(case.buses))
        losses = sum(complex(f.p_loss, f.q_loss) for f in report.flows)
        total = injections.sum()
        assert total.real == pytest.approx((losses + shunts).real, abs=1e-9)
        assert total.imag == pytest.approx((losses + shunts).imag, abs=1e-9)


class TestResourceEstimate:
    def test_five_bus_layout(self):
        est = solvers.resource_estimate(cases.five_bus())
        assert est.n_vector == 2  # four angle unknowns
        assert est.qubits_total == 4 + 2 + 1

    @pytest.mark.parametrize("dim,expected", [(2, 1), (4, 2), (8, 3), (16, 4)])
    def test_chain_scaling(self, dim, expected):
        est = solvers.resource_estimate(cases.chain(dim))
        assert est.n_vector == expected
        assert est.qubits_total == est.n_clock + est.n_vector + 1

    def test_two_bus_minimum_register(self):
        est = solvers.resource_estimate(cases.two_bus())
        assert est.n_vector == 1
        assert est.qubits_total == 6

    def test_dimension_five_pads_to_eight(self):
        buses = [network.Bus(1, "slack")] + [network.Bus(i, "pq", pd=0.01) for i in range(2, 7)]
        branches = [network.Branch(i, i + 1, 0.01, 0.1) for i in range(1, 6)]
        case = network.NetworkCase("six_bus", 100.0, tuple(buses), tuple(branches))
        est = solvers.resource_estimate(case)
        assert est.n_vector == 3
