import io
import json
import math

import numpy as np
import pytest

from spectral_sbm.clustering import delta_power
from spectral_sbm.errors import ParameterError, ResourceError
from spectral_sbm.verification import (
    AuditRecord,
    audit_decomposition,
    audit_entry_bound_RtL,
    audit_lr_entry_bound,
    audit_noise_norm,
    audit_norm_lemmas,
    audit_power_svd_residual,
    audit_projection_scaling,
    audit_weyl,
    decompose_terms,
    write_records,
)


# ===== DECOMPOSITION =====

def test_decomposition_without_noise(instance):
    _, _, _, parts = instance(10, 1.0, 0.0, sizes=(5, 5))
    terms = decompose_terms(parts, 4)
    assert terms.M.is_zero and terms.Mp.is_zero and terms.Rr.is_zero
    np.testing.assert_allclose(terms.Lr.to_dense(), terms.Br.to_dense(), rtol=1e-14)
    record = audit_decomposition(terms)
    assert record.passed and record.exact
    assert record.measured <= 1e-15


@pytest.mark.parametrize("n, r", [(30, 4), (50, 6), (100, 3)])
def test_decomposition_reconstructs_power(instance, n, r):
    _, _, b, parts = instance(n, 0.6, 0.2, k=2, seed=n)
    terms = decompose_terms(parts, r)
    assert terms.reconstruction_error() <= 1e-9
    naive = np.linalg.matrix_power(b, r)
    np.testing.assert_allclose(terms.Br.to_dense(), naive, rtol=1e-9, atol=1e-9 * np.abs(naive).max())


def test_decomposition_terms_at_r2(instance):
    _, _, b, parts = instance(20, 0.7, 0.2, k=2, seed=1)
    terms = decompose_terms(parts, 2)
    L, R = parts.L, parts.R
    np.testing.assert_allclose(terms.Lr.to_dense(), L @ L, atol=1e-12)
    np.testing.assert_allclose(terms.M.to_dense(), L @ R, atol=1e-12)
    np.testing.assert_allclose(terms.Mp.to_dense(), R @ L, atol=1e-12)
    np.testing.assert_allclose(terms.Rr.to_dense(), R @ R, atol=1e-12)


def test_decomposition_at_r1_has_zero_cross_terms(instance):
    _, _, _, parts = instance(12, 0.6, 0.2, k=2, seed=2)
    terms = decompose_terms(parts, 1)
    assert terms.M.is_zero and terms.Mp.is_zero
    np.testing.assert_allclose(terms.Rr.to_dense(), parts.R, atol=1e-15)
    assert terms.reconstruction_error() <= 1e-12


def test_decomposition_limits(instance):
    _, _, _, parts = instance(6, 0.6, 0.2, k=2)
    with pytest.raises(ParameterError):
        decompose_terms(parts, 0)
    _, _, _, big = instance(501, 0.6, 0.2, k=2)
    with pytest.raises(ResourceError):
        decompose_terms(big, 2)


# ===== ROW-NORM LEMMAS =====

def test_norm_lemmas_without_noise(instance):
    _, _, _, parts = instance(10, 1.0, 0.0, sizes=(5, 5))
    terms = decompose_terms(parts, 3)
    record = audit_norm_lemmas(terms, delta_power(5, 1.0, 0.0, 3))
    assert record.measured["M_row"] == 0.0
    assert record.measured["Mp_row"] == 0.0
    assert record.measured["Rr_row"] == 0.0
    assert record.passed


def test_structure_separation_on_equal_clusters(instance):
    # rows of L^r from two equal clusters differ on 2 s entries of size (p-q)^r s^(r-1)
    _, _, _, parts = instance(12, 0.8, 0.2, sizes=(6, 6))
    s, r, gap = 6, 4, 0.8 - 0.2
    terms = decompose_terms(parts, r)
    log_delta = delta_power(s, 0.8, 0.2, r)
    separation = audit_norm_lemmas(terms, log_delta).measured["Lr_separation"]
    lemma_distance = math.sqrt(s) * gap ** r * s ** (r - 1)
    assert separation * math.exp(log_delta) == pytest.approx(math.sqrt(2) * lemma_distance, rel=1e-9)
    assert separation == pytest.approx(2 * math.sqrt(2), rel=1e-9)


def test_norm_lemmas_single_cluster_separation_is_infinite(instance):
    _, _, _, parts = instance(8, 0.7, 0.2, sizes=(8,), seed=3)
    record = audit_norm_lemmas(decompose_terms(parts, 2), delta_power(8, 0.7, 0.2, 2))
    assert record.measured["Lr_separation"] == math.inf
    assert json.loads(record.to_json())["measured"]["Lr_separation"] is None


# ===== ENTRY BOUNDS =====

def test_entry_bounds_vanish_without_noise(instance):
    _, _, _, parts = instance(10, 1.0, 0.0, sizes=(5, 5))
    assert audit_entry_bound_RtL(parts, 2, 5, 1.0, 0.0).measured == 0.0
    assert audit_lr_entry_bound(parts, 2, 5, 1.0, 0.0).measured == 0.0


def test_entry_bound_on_sampled_instances(instance):
    passed = 0
    for seed in range(20):
        model, _, _, parts = instance(400, 0.6, 0.1, k=2, seed=seed)
        record = audit_entry_bound_RtL(parts, 1, model.s_star, 0.6, 0.1, log_power=3)
        assert record.params["log_power"] == 3
        passed += record.passed
    assert passed >= 18


def test_entry_bound_log_max_entry_matches_direct(instance):
    model, _, _, parts = instance(400, 0.6, 0.1, sizes=(200, 200), seed=5)
    record = audit_entry_bound_RtL(parts, 1, model.s_star, 0.6, 0.1)
    assert 0.0 < record.measured <= 1.0
    direct = np.max(np.abs(parts.R @ parts.L))
    assert record.extra["log_max_entry"] == pytest.approx(math.log(direct), rel=1e-9)


def test_lr_entry_bound_on_sampled_instance(instance):
    model, _, _, parts = instance(400, 0.6, 0.1, sizes=(200, 200), seed=6)
    for t in (1, 2):
        record = audit_lr_entry_bound(parts, t, model.s_star, 0.6, 0.1)
        assert record.passed


@pytest.mark.parametrize("t", [0, 7])
def test_entry_bound_rejects_t_outside_range(instance, t):
    _, _, _, parts = instance(400, 0.6, 0.1, k=2)
    with pytest.raises(ParameterError):
        audit_entry_bound_RtL(parts, t, 200, 0.6, 0.1)


# ===== SPECTRAL AUDITS =====

def test_projection_scaling_on_exact_spectrum():
    b = np.diag([1.5, 1.5, 0.0, 0.0, 0.0, 0.0])
    record = audit_projection_scaling(b, 2, 5, 0.75, 0.25)
    assert record.measured["top_deviation"] <= 1e-12
    assert record.measured["tail_max"] <= 1e-30
    assert record.passed


def test_projection_scaling_full_rank_has_empty_tail(sym):
    record = audit_projection_scaling(sym(5), 5, 2, 0.6, 0.1)
    assert record.measured["tail_max"] == 0.0


def test_projection_scaling_on_balanced_instance(instance):
    _, _, b, _ = instance(600, 0.9, 0.1, sizes=(300, 300), seed=8)
    record = audit_projection_scaling(b, 2, 7, 0.9, 0.1)
    assert record.measured["top_deviation"] <= 0.5
    assert record.measured["tail_max"] <= 1e-3


def test_noise_norm_concentrates(instance):
    _, _, _, parts = instance(1000, 0.5, 0.1, k=4, seed=9)
    record = audit_noise_norm(parts)
    assert record.passed
    assert 1.0 < record.measured <= 2.2
    assert record.extra["sigma2_below_p_1mq"]


def test_noise_norm_without_noise(instance):
    _, _, _, parts = instance(10, 1.0, 0.0, sizes=(5, 5))
    assert audit_noise_norm(parts).measured == 0.0


def test_weyl_sandwich_holds(instance):
    for seed in range(20):
        _, _, _, parts = instance(200, 0.5, 0.1, k=4, seed=seed)
        record = audit_weyl(parts)
        assert record.passed and record.exact
        assert record.extra["max_shift"] <= record.extra["norm_R"] + 1e-9


def test_power_svd_residual_audit_uses_bar():
    b = np.diag([1.5, 1.5, 0.0, 0.0, 0.0, 0.0])
    assert audit_power_svd_residual(b, 2, 3, 0.75, 0.25).passed
    assert audit_power_svd_residual(b, 2, 3, 0.75, 0.25, bar=-1.0).passed is False


# ===== SERIALIZATION =====

def test_records_serialize_as_json_lines():
    records = [
        AuditRecord("a", "claim", {"n": np.int64(3)}, np.float64(0.5), 1.0, np.bool_(True)),
        AuditRecord("b", "claim", {}, {"x": math.nan}, [1, 2], False, exact=True),
    ]
    stream = io.StringIO()
    write_records(records, stream)
    lines = stream.getvalue().splitlines()
    assert len(lines) == 2
    first, second = (json.loads(line) for line in lines)
    assert first["params"]["n"] == 3 and first["passed"] is True
    assert second["measured"]["x"] is None
    assert second["envelope"] == [1, 2]
