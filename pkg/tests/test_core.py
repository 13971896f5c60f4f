"""Validation and quantity-of-interest plumbing."""

from __future__ import annotations

import numpy as np
import pytest

from dropaudit.core import (
    Z_975,
    DrawBundle,
    NumericalError,
    QoiSpec,
    ValidationError,
    index_set_to_weight,
    resolve_qoi_preset,
    resolve_qoi_rule,
    validate_index_set,
    validate_weights,
    weight_to_index_set,
)


def _bundle(g, n_obs=3, kind="exact_iid"):
    g = np.asarray(g, dtype=float)
    rng = np.random.default_rng(0)
    ll = rng.normal(size=(g.size, n_obs))
    return DrawBundle(g_values=g, loglik=ll, sampling_kind=kind)


class TestDrawBundle:
    def test_shapes_and_counts(self):
        b = _bundle([0.0, 1.0, 2.0], n_obs=5)
        assert b.n_draws == 3
        assert b.n_obs == 5

    def test_arrays_are_frozen(self):
        b = _bundle([0.0, 1.0])
        with pytest.raises(ValueError):
            b.g_values[0] = 9.0
        with pytest.raises(ValueError):
            b.loglik[0, 0] = 9.0

    def test_defensive_copy(self):
        g = np.array([0.0, 1.0])
        ll = np.zeros((2, 2))
        b = DrawBundle(g_values=g, loglik=ll)
        g[0] = 5.0
        ll[0, 0] = 5.0
        assert b.g_values[0] == 0.0
        assert b.loglik[0, 0] == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            DrawBundle(g_values=np.array([1.0]), loglik=np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            DrawBundle(g_values=np.array([1.0, 2.0]), loglik=np.zeros((3, 2)))
        with pytest.raises(ValidationError):
            DrawBundle(g_values=np.array([1.0, 2.0]), loglik=np.zeros((2, 0)))
        with pytest.raises(ValidationError):
            DrawBundle(g_values=np.array([1.0, np.nan]), loglik=np.zeros((2, 2)))
        with pytest.raises(ValidationError):
            DrawBundle(
                g_values=np.array([1.0, 2.0]),
                loglik=np.full((2, 2), np.inf),
            )
        with pytest.raises(ValidationError):
            _bundle([0.0, 1.0], kind="bootstrap")


class TestQoiSpec:
    def test_mean_only(self):
        spec = QoiSpec(c1=1.0, c2=0.0)
        assert spec.c1 == 1.0
        assert spec.preset == "custom"

    def test_rejects_degenerate(self):
        with pytest.raises(ValidationError):
            QoiSpec(c1=0.0, c2=0.0)
        with pytest.raises(ValidationError):
            QoiSpec(c1=np.nan, c2=1.0)
        with pytest.raises(ValidationError):
            QoiSpec(c1=1.0, c2=0.0, z=0.0)


class TestWeightsAndIndexSets:
    def test_validate_weights(self):
        w = validate_weights([1, 0.5, 0], 3)
        assert w.dtype == np.float64
        with pytest.raises(ValidationError):
            validate_weights([1, 1], 3)
        with pytest.raises(ValidationError):
            validate_weights([1, -0.1, 1], 3)
        with pytest.raises(ValidationError):
            validate_weights([1, 1.1, 1], 3)
        with pytest.raises(ValidationError):
            validate_weights([0, 0, 0], 3)

    def test_validate_index_set(self):
        assert validate_index_set([3, 1], 5) == (1, 3)
        assert validate_index_set([], 5, allow_empty=True) == ()
        with pytest.raises(ValidationError):
            validate_index_set([], 5)
        with pytest.raises(ValidationError):
            validate_index_set([0], 5)
        with pytest.raises(ValidationError):
            validate_index_set([6], 5)
        with pytest.raises(ValidationError):
            validate_index_set([2, 2], 5)

    def test_roundtrip(self):
        w = index_set_to_weight([2, 4], 5)
        assert np.array_equal(w, [1.0, 0.0, 1.0, 0.0, 1.0])
        assert weight_to_index_set(w) == frozenset({2, 4})
        with pytest.raises(ValidationError):
            weight_to_index_set([1.0, 0.5, 0.0])


class TestQoiRules:
    def test_sign_rule(self):
        assert resolve_qoi_rule("sign", mean=2.0, sd=1.0) == (-1.0, 0.0)
        assert resolve_qoi_rule("sign", mean=-2.0, sd=1.0) == (1.0, 0.0)

    def test_sig_rule(self):
        c1, c2 = resolve_qoi_rule("sig", mean=3.0, sd=1.0)
        assert c1 == -1.0
        assert c2 == pytest.approx(Z_975)
        c1, c2 = resolve_qoi_rule("sig", mean=-3.0, sd=1.0)
        assert c1 == 1.0
        assert c2 == pytest.approx(Z_975)

    def test_sig_rule_requires_significance(self):
        with pytest.raises(ValidationError):
            resolve_qoi_rule("sig", mean=1.0, sd=1.0)

    def test_both_rule(self):
        c1, c2 = resolve_qoi_rule("both", mean=3.0, sd=1.0)
        assert (c1, c2) == pytest.approx((-1.0, -Z_975))
        c1, c2 = resolve_qoi_rule("both", mean=-3.0, sd=1.0)
        assert (c1, c2) == pytest.approx((1.0, -Z_975))

    def test_zero_mean_rejected(self):
        for preset in ("sign", "sig", "both"):
            with pytest.raises(ValidationError):
                resolve_qoi_rule(preset, mean=0.0, sd=1.0)

    def test_custom_z(self):
        c1, c2 = resolve_qoi_rule("sig", mean=10.0, sd=1.0, z=2.5)
        assert c2 == 2.5

    def test_phi_negative_at_full_data(self):
        # The convention: every preset yields a functional that is negative
        # when evaluated at the full-data posterior it was resolved against.
        rng = np.random.default_rng(3)
        for _ in range(200):
            mean = rng.normal() * 4.0
            sd = rng.uniform(0.05, 2.0)
            for preset in ("sign", "sig", "both"):
                if mean == 0.0:
                    continue
                try:
                    c1, c2 = resolve_qoi_rule(preset, mean=mean, sd=sd)
                except ValidationError:
                    continue
                assert c1 * mean + c2 * sd < 0.0

    def test_resolve_from_bundle(self):
        g = np.array([1.0, 2.0, 3.0, 10.0])
        rng = np.random.default_rng(1)
        bundle = DrawBundle(g_values=g, loglik=rng.normal(size=(4, 2)))
        spec = resolve_qoi_preset("sign", bundle)
        assert spec.preset == "sign"
        assert (spec.c1, spec.c2) == (-1.0, 0.0)
        # Biased sd: sqrt(mean(g^2) - mean(g)^2).
        sd = float(np.sqrt(np.mean(g**2) - np.mean(g) ** 2))
        spec = resolve_qoi_preset("both", bundle)
        assert spec.c1 * g.mean() + spec.c2 * sd < 0.0

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            resolve_qoi_rule("median", mean=1.0, sd=1.0)
