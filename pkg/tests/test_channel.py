import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from crossbar_quant.channel import (
    ChannelParams,
    PathConfig,
    cell_path_config,
    count_arrangements,
    mc_type_histogram,
    p_lambda,
    rho,
    sample_array,
    sample_reads,
    sneak_mixture,
    solve_alpha,
    transition_pdf,
    type_distribution,
)


def brute_force_counts(u, v, L):
    """Counter of (k_l, k_c) over all L-subsets of a u x v grid."""
    cells = [(r, c) for r in range(u) for c in range(v)]
    out = Counter()
    for sub in itertools.combinations(cells, L):
        out[len({r for r, _ in sub}), len({c for _, c in sub})] += 1
    return out


class TestRho:
    def test_no_path(self, defaults):
        assert rho(1, None, defaults) == 100.0
        assert rho(0, None, defaults) == 1000.0

    def test_single_path(self, defaults):
        assert rho(0, 3.0, defaults) == pytest.approx(3000 / 13, rel=1e-12)

    def test_rejects_nonpositive_alpha(self, defaults):
        with pytest.raises(ValueError):
            rho(0, 0.0, defaults)

    @given(st.floats(0.1, 50), st.sampled_from([0, 1]))
    def test_bounded_by_cell_resistance(self, alpha, bit):
        p = ChannelParams()
        assert 0 < rho(bit, alpha, p) <= p.r(bit)


class TestSolveAlpha:
    def test_single_cell(self):
        assert solve_alpha(PathConfig([(1, 1)])) == pytest.approx(3.0, abs=1e-12)

    def test_disjoint_pair(self):
        # two independent three-resistor paths in parallel
        assert solve_alpha(PathConfig([(1, 1), (2, 2)])) == pytest.approx(1.5, abs=1e-12)

    def test_shared_row(self):
        # (1 + 1) || (1 + 1) then one shared resistor
        assert solve_alpha(PathConfig([(1, 1), (1, 2)])) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("L", [1, 2, 3, 5])
    def test_disjoint_paths(self, L):
        cfg = PathConfig([(k, k) for k in range(L)])
        assert solve_alpha(cfg) == pytest.approx(3.0 / L, rel=1e-12)

    def test_full_2x2(self):
        # symmetric nodes: columns in parallel (1/2), four cross links (1/4), rows (1/2)
        assert solve_alpha(PathConfig([(0, 0), (0, 1), (1, 0), (1, 1)])) == pytest.approx(1.25, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            solve_alpha(PathConfig())

    @settings(max_examples=60, deadline=None)
    @given(
        st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=8),
        st.permutations(range(5)),
        st.permutations(range(5)),
    )
    def test_relabel_invariance(self, cells, row_perm, col_perm):
        moved = {(row_perm[r] + 10, col_perm[c] + 3) for r, c in cells}
        assert solve_alpha(PathConfig(cells)) == pytest.approx(solve_alpha(PathConfig(moved)), rel=1e-10)


class TestCountArrangements:
    def test_examples(self):
        assert count_arrangements(4, 5, 1, 1, 1) == 20
        assert count_arrangements(2, 2, 2, 2, 2) == 2
        assert count_arrangements(3, 3, 2, 1, 2) == 9

    @pytest.mark.parametrize("u,v", [(u, v) for u in range(1, 5) for v in range(1, 5)])
    def test_matches_brute_force(self, u, v):
        for L in range(0, min(6, u * v) + 1):
            brute = brute_force_counts(u, v, L)
            for k_l in range(0, u + 1):
                for k_c in range(0, v + 1):
                    if k_l <= L and k_c <= L and L <= k_l * k_c:
                        assert count_arrangements(u, v, L, k_l, k_c) == brute.get((k_l, k_c), 0)
                    else:
                        assert brute.get((k_l, k_c), 0) == 0

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            count_arrangements(2, 2, 5, 2, 2)
        with pytest.raises(ValueError):
            count_arrangements(2, 2, 1, 3, 1)


class TestTypeDistribution:
    def test_no_failures(self):
        p = ChannelParams(p_f=0.0)
        assert p_lambda(p, (0, 0, 0)) == 1.0
        assert p_lambda(p, (1, 1, 1)) == 0.0
        assert p_lambda(p, (2, 2, 2)) == 0.0

    def test_full_2x2(self):
        p = ChannelParams(m=2, n=2, q1=1.0, p_f=1.0)
        assert p_lambda(p, (1, 1, 1)) == pytest.approx(1.0)

    def test_path_free_mass(self, defaults):
        a = defaults.p_f * defaults.q1
        direct = sum(
            math.comb(15, u) * math.comb(15, v) * 0.5**30 * (1 - a) ** (u * v)
            for u in range(16) for v in range(16)
        )
        raw = type_distribution(defaults, renormalize=False)
        assert raw[0, 0, 0] == pytest.approx(direct, rel=1e-12)

    @pytest.mark.parametrize("params", [
        ChannelParams(),
        ChannelParams(m=4, n=4, p_f=0.5),
        ChannelParams(m=8, n=5, p_f=0.05, q1=0.3),
        ChannelParams(m=3, n=3, p_f=1.0, q1=1.0, l_max=4),
    ])
    def test_sums_to_one(self, params):
        assert sum(type_distribution(params).values()) == pytest.approx(1.0, abs=1e-9)
        assert sneak_mixture(params).weights.sum() == pytest.approx(1.0, abs=1e-9)

    def test_tail_mass_negligible_at_defaults(self, defaults):
        assert sneak_mixture(defaults).truncated_mass < 1e-9

    def test_l_max_enforced(self, defaults):
        with pytest.raises(ValueError):
            p_lambda(defaults, (5, 2, 3))

    def test_single_path_against_monte_carlo(self, defaults, rng):
        trials = 10**6
        hist = mc_type_histogram(defaults, trials, rng)
        for key in [(0, 0, 0), (1, 1, 1)]:
            p = p_lambda(defaults, key)
            se = math.sqrt(p * (1 - p) / trials)
            assert abs(hist.get(key, 0.0) - p) < 3 * se

    def test_full_histogram_small_array(self, rng):
        # l_max = 9 covers every type of a 4x4 array
        params = ChannelParams(m=4, n=4, p_f=0.5, q1=0.5, l_max=9)
        hist = mc_type_histogram(params, 10**6, rng)
        model = type_distribution(params)
        keys = set(hist) | set(model)
        l1 = sum(abs(hist.get(k, 0.0) - model.get(k, 0.0)) for k in keys)
        assert l1 <= 0.01


def independent_mixture_density(r, bit, params):
    """Term-by-term recomputation from the raw type formula."""
    from crossbar_quant.channel import type_alpha_classes

    a = params.p_f * params.q1
    comps = []
    for L in range(0, params.l_max + 1):
        for k_l in range(0, L + 1):
            for k_c in range(0, L + 1):
                if (L == 0) != (k_l == 0 and k_c == 0) or L > k_l * k_c and L > 0:
                    continue
                grid = brute_force_counts(k_l, k_c, L).get((k_l, k_c), 0) if L else 1
                prob = 0.0
                for u in range(params.m):
                    for v in range(params.n):
                        if u < k_l or v < k_c or u * v < L:
                            continue
                        p_uv = (math.comb(params.m - 1, u) * math.comb(params.n - 1, v)
                                * params.q1 ** (u + v)
                                * (1 - params.q1) ** (params.m - 1 - u + params.n - 1 - v))
                        prob += (math.comb(u, k_l) * math.comb(v, k_c) * grid
                                 * p_uv * a**L * (1 - a) ** (u * v - L))
                if L == 0:
                    comps.append((prob, None))
                else:
                    classes = type_alpha_classes(L, k_l, k_c)
                    total = sum(c for _, c in classes)
                    comps += [(prob * c / total, al) for al, c in classes]
    norm_const = sum(p for p, _ in comps)
    return sum(p / norm_const * norm.pdf(r, rho(bit, al, params), params.sigma_eta) for p, al in comps)


class TestTransitionPdf:
    def test_no_failures_is_single_gaussian(self):
        p = ChannelParams(p_f=0.0, sigma_eta=50)
        r = np.linspace(0, 300, 31)
        np.testing.assert_allclose(transition_pdf(r, 1, p), norm.pdf(r, 100, 50), rtol=1e-12)

    def test_term_by_term(self):
        p = ChannelParams(sigma_eta=50)
        assert transition_pdf(1000.0, 0, p) == pytest.approx(independent_mixture_density(1000.0, 0, p), rel=1e-3)
        assert transition_pdf(240.0, 0, p) == pytest.approx(independent_mixture_density(240.0, 0, p), rel=1e-3)

    @pytest.mark.parametrize("bit", [0, 1])
    @pytest.mark.parametrize("sigma", [20, 80])
    def test_normalised(self, bit, sigma):
        p = ChannelParams(sigma_eta=sigma)
        mus = sneak_mixture(p).rho(bit, p)
        lo, hi = mus.min() - 10 * sigma, mus.max() + 10 * sigma
        points = sorted(mus)
        total, _ = quad(lambda r: transition_pdf(r, bit, p), lo, hi, points=points, limit=400,
                        epsabs=1e-12, epsrel=1e-12)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestSampling:
    def test_all_ones_and_zeros(self, rng):
        bits, _ = sample_array(ChannelParams(q1=1.0), rng)
        assert bits.all()
        bits, _ = sample_array(ChannelParams(q1=0.0), rng)
        assert not bits.any()

    def test_ones_fraction(self, rng):
        bits, _ = sample_array(ChannelParams(), rng, size=10**5)
        assert bits.mean() == pytest.approx(0.5, abs=0.005)

    def test_reproducible(self):
        a = sample_array(ChannelParams(), np.random.default_rng(7))
        b = sample_array(ChannelParams(), np.random.default_rng(7))
        assert (a[0] == b[0]).all() and (a[1] == b[1]).all()


class TestCellPathConfig:
    def fig1_array(self):
        # 1-based cells (3,2), (3,4), (1,4), (1,2) low resistance, as in the 4x4 example
        bits = np.zeros((4, 4), dtype=bool)
        for r, c in [(3, 2), (3, 4), (1, 4), (1, 2)]:
            bits[r - 1, c - 1] = True
        return bits

    def test_example_path_needs_failed_selector(self):
        bits = self.fig1_array()
        fails = np.zeros_like(bits)
        assert len(cell_path_config((bits, fails), 2, 1)) == 0
        fails[0, 3] = True  # intersection cell (1,4)
        cfg = cell_path_config((bits, fails), 2, 1)
        assert cfg.cells == {(0, 3)}
        assert solve_alpha(cfg) == pytest.approx(3.0)

    def test_all_zero(self):
        z = np.zeros((5, 5), dtype=bool)
        assert len(cell_path_config((z, ~z), 2, 2)) == 0

    def test_full_3x3(self):
        ones = np.ones((3, 3), dtype=bool)
        cfg = cell_path_config((ones, ones), 0, 0)
        assert cfg.type == (4, 2, 2)

    def test_reads(self, defaults, rng):
        tiny = defaults.replace(sigma_eta=1e-9)
        assert np.allclose(sample_reads(1, PathConfig(), 5, tiny, rng), 100.0)
        p = defaults.with_sigma(50)
        reads = sample_reads(0, PathConfig([(1, 1)]), 10**6, p, rng)
        assert reads.mean() == pytest.approx(3000 / 13, abs=3 * 50 / 1e3)
        a = sample_reads(0, PathConfig([(1, 1)]), 4, p, np.random.default_rng(3))
        b = sample_reads(0, PathConfig([(1, 1)]), 4, p, np.random.default_rng(3))
        assert (a == b).all()


def test_simulated_reads_match_model_density(rng):
    """Exact array simulation vs the type-based mixture, histogram L1 distance."""
    from crossbar_quant.simulate import simulate_cells

    p = ChannelParams(sigma_eta=40)
    bits_all, reads_all = [], []
    for bits, reads in simulate_cells(p, 10**6, 1, rng):
        bits_all.append(bits)
        reads_all.append(reads[:, 0])
    bits = np.concatenate(bits_all)
    reads = np.concatenate(reads_all)
    edges = np.linspace(-200, 1400, 161)
    for bit in (0, 1):
        sel = reads[bits == bit]
        emp = np.histogram(sel, bins=edges)[0] / len(sel)
        mix = sneak_mixture(p)
        cdf = norm.cdf(edges[:, None], mix.rho(bit, p), p.sigma_eta) @ mix.weights
        model = np.diff(cdf)
        assert np.abs(emp - model).sum() <= 0.02


def test_params_json_round_trip():
    p = ChannelParams(m=8, sigma_eta=55.0)
    data = p.to_json_dict()
    assert set(data) == {"m", "n", "r0_ohm", "r1_ohm", "p_f", "q1", "sigma_eta_ohm", "l_max"}
    assert ChannelParams.from_json(p.to_json()) == p


@pytest.mark.parametrize("bad", [dict(m=1), dict(r1=2000.0), dict(sigma_eta=0.0), dict(p_f=1.5), dict(l_max=-1)])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        ChannelParams(**bad)
