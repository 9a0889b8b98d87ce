import math

import numpy as np
import pytest

from modfesh.errors import DomainError
from modfesh.floquet import (DrivenTwoLevel, avoided_crossing_gap, effective_coupling,
                             floquet_spectrum, minimum_truncation_order,
                             resonance_frequencies)
from modfesh.specfun import bessel_j

from oracles import bessel_series


def model(omega_b=1.0, Omega=0.02, A=1.0, omega_mod=1.0):
    return DrivenTwoLevel(omega_alpha=0.0, omega_beta=-omega_b, Omega=Omega,
                          A=A, omega_mod=omega_mod)


class TestEffectiveCoupling:
    def test_no_drive_kills_sidebands(self):
        assert effective_coupling(model(A=0.0), 1) == 0.0

    def test_no_drive_keeps_carrier(self):
        assert effective_coupling(model(A=0.0, Omega=0.37), 0) == pytest.approx(0.37)

    def test_bessel_weight(self):
        m = model(Omega=0.5, A=1.0, omega_mod=1.0)
        expected = -0.5 * bessel_series(1, 1.0)   # (-1)^1 Omega J_1(1)
        assert effective_coupling(m, 1) == pytest.approx(expected, rel=1e-12)

    def test_requires_positive_modulation(self):
        bad = DrivenTwoLevel(0.0, -1.0, 0.1, 1.0, 0.0)
        with pytest.raises(DomainError):
            effective_coupling(bad, 1)


class TestResonanceFrequencies:
    def test_fundamental_and_subharmonics(self):
        # 228.7 kHz binding: orders at 228.7, 114.35, 76.233... kHz
        omega_b = 2 * math.pi * 228.7e3
        res = resonance_frequencies(omega_b, 3)
        ms = [m for m, _ in res]
        freqs = [w / (2 * math.pi) for _, w in res]
        assert ms == [-1, -2, -3]
        assert freqs[0] == pytest.approx(228.7e3)
        assert freqs[1] == pytest.approx(114.35e3)
        assert freqs[2] == pytest.approx(228.7e3 / 3.0)
        # measured values quoted for this binding energy lie within 2 %
        assert abs(114.3e3 - freqs[1]) / freqs[1] < 0.02
        assert abs(75.0e3 - freqs[2]) / freqs[2] < 0.02

    def test_single_order(self):
        res = resonance_frequencies(-5.0, 1)
        assert res == [(1, 5.0)]

    def test_sign_flip(self):
        plus = resonance_frequencies(3.0, 3)
        minus = resonance_frequencies(-3.0, 3)
        assert [(-m, w) for m, w in plus] == minus

    def test_validation(self):
        with pytest.raises(DomainError):
            resonance_frequencies(0.0, 2)
        with pytest.raises(DomainError):
            resonance_frequencies(1.0, 0)


class TestFloquetSpectrum:
    def test_bare_levels_when_uncoupled(self):
        m = DrivenTwoLevel(omega_alpha=0.31, omega_beta=-0.54, Omega=0.0, A=0.0,
                          omega_mod=1.0)
        sol = floquet_spectrum(m)
        # quasi-energies are the bare levels mod omega: -0.54 folds to +0.46
        assert sorted(sol.quasi_energies) == pytest.approx([0.31, 0.46], abs=1e-12)
        for pair_e, bare in zip(sol.pair_energies, (0.31, -0.54)):
            assert (pair_e - bare) / m.omega_mod == pytest.approx(
                round((pair_e - bare) / m.omega_mod), abs=1e-12)
        assert np.all(sol.quasi_energies > -0.5)
        assert np.all(sol.quasi_energies <= 0.5)

    def test_gauge_shift(self):
        m1 = model(omega_b=1.0, Omega=0.02, A=1.0, omega_mod=0.995)
        shift = 0.4321
        m2 = DrivenTwoLevel(m1.omega_alpha + shift, m1.omega_beta + shift,
                            m1.Omega, m1.A, m1.omega_mod)
        s1 = floquet_spectrum(m1)
        s2 = floquet_spectrum(m2)
        assert s2.pair_energies == pytest.approx(s1.pair_energies + shift, abs=1e-12)

    def test_truncation_drift(self):
        m = model(omega_b=1.0, Omega=0.02, A=2.0, omega_mod=1.0)
        n0 = minimum_truncation_order(m)
        s_a = floquet_spectrum(m, truncation_order=n0)
        s_b = floquet_spectrum(m, truncation_order=n0 + 5)
        assert np.max(np.abs(s_a.pair_energies - s_b.pair_energies)) < 1e-9 * m.omega_mod

    def test_minimum_truncation_enforced(self):
        m = model(A=3.0)
        with pytest.raises(DomainError):
            floquet_spectrum(m, truncation_order=3)

    def test_drive_parity(self):
        m_plus = model(A=1.3, omega_mod=0.98)
        m_minus = model(A=-1.3, omega_mod=0.98)
        s_plus = floquet_spectrum(m_plus)
        s_minus = floquet_spectrum(m_minus)
        assert s_minus.gap == pytest.approx(s_plus.gap, rel=1e-10)

    def test_mode_weights_normalized(self):
        sol = floquet_spectrum(model())
        for s in range(2):
            total = float(np.sum(np.abs(sol.mode_weights[s]) ** 2))
            assert total == pytest.approx(1.0, rel=1e-12)


class TestAvoidedCrossingGap:
    def test_uncoupled_gap_vanishes(self):
        m = model(omega_b=1.0, Omega=0.0, A=1.0)
        gap, center = avoided_crossing_gap(m, -1, (0.98, 1.02))
        assert gap == pytest.approx(0.0, abs=1e-12)
        assert center == pytest.approx(1.0, abs=1e-6)

    def test_weak_drive_first_order(self):
        m = model(omega_b=1.0, Omega=0.01, A=0.8)
        gap, center = avoided_crossing_gap(m, -1, (0.98, 1.02))
        expected = 0.01 * abs(bessel_j(1, 0.8 / center))
        assert gap == pytest.approx(expected, rel=1e-3)

    def test_gap_ratio_tracks_bessel(self):
        # gap(m)/gap(1) = |J_m / J_1| at the respective resonances
        omega_b = -1.0   # continuum-side state: m positive
        Om, A = 0.02, 1.0
        gaps = {}
        for m_order in (1, 2):
            m = DrivenTwoLevel(0.0, 1.0, Om, A, 1.0 / m_order)
            window = (1.0 / m_order * 0.99, 1.0 / m_order * 1.01)
            gaps[m_order], _ = avoided_crossing_gap(m, m_order, window)
        expected = abs(bessel_j(2, A / 0.5) / bessel_j(1, A / 1.0))
        assert gaps[2] / gaps[1] == pytest.approx(expected, rel=5e-3)

    def test_drive_induced_center_shift_power_law(self):
        # the gap center carries an A-independent Omega^2 repulsion plus a
        # drive-induced piece scaling as A^(2|m|); measure the m = 1 case
        om = 0.004
        shifts = {}
        for amp in (1e-3, 0.05, 0.1, 0.2, 0.4):
            m = DrivenTwoLevel(0.0, 1.0, om, amp, 1.0)
            _, center = avoided_crossing_gap(m, 1, (0.995, 1.005))
            shifts[amp] = center - 1.0
        base = shifts[1e-3]
        assert base == pytest.approx(om ** 2 / 2.0, rel=0.05)
        amps = np.array([0.05, 0.1, 0.2, 0.4])
        deltas = np.array([abs(shifts[a] - base) for a in amps])
        slope = np.polyfit(np.log(amps), np.log(deltas), 1)[0]
        assert 1.7 <= slope <= 2.1

    def test_window_must_bracket(self):
        m = model(omega_b=1.0)
        with pytest.raises(DomainError):
            avoided_crossing_gap(m, -1, (1.5, 2.0))

    def test_no_interior_minimum(self):
        # monotone edge of the resonance: minimum pinned at the window edge
        m = model(omega_b=1.0, Omega=0.01, A=0.8)
        with pytest.raises(DomainError):
            avoided_crossing_gap(m, -1, (0.9999999, 1.1))


class TestRwaOracle:
    @pytest.mark.parametrize("m_order", [1, 2, 3])
    @pytest.mark.parametrize("ratio", [0.5, 1.0, 2.0, 3.0])
    def test_gap_matches_rwa(self, m_order, ratio):
        # continuum-side level, resonance at omega = 1
        omega_b = -float(m_order)
        Om = 0.02
        A = ratio
        m = DrivenTwoLevel(0.0, -omega_b, Om, A, 1.0)
        half = 0.02 / m_order
        gap, center = avoided_crossing_gap(m, m_order, (1.0 - half, 1.0 + half))
        rwa = Om * abs(bessel_j(m_order, A / center))
        assert abs(gap - rwa) <= 0.01 * rwa
