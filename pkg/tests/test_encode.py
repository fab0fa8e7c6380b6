import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyset.encode import (BASELINE, EncoderConfig, baseline_embed, chain_feature_matrix, chain_features,
                            polyset_embed, read_embeddings, write_embeddings)
from polyset.ensemble import Chain, PolySetEnsemble, sample_grid
from polyset.errors import DomainError, VocabularyError
from polyset.mwd import fit_mwd

CFG = EncoderConfig()


def rbf_block(v, cfg=CFG):
    start = len(cfg.monomer_vocab)
    return v[start:start + cfg.n_rbf]


class TestChainFeatures:
    def test_layout(self):
        f = chain_features(Chain(1000, 1e5), "A", CFG)
        assert f.shape == (CFG.dim(),) == (1 + 32 + 1,)
        assert f[0] == 1.0 and f[-1] == pytest.approx(5.0)

    def test_peak_at_center(self):
        k = 7
        m = 10 ** CFG.centers[k]
        assert rbf_block(chain_feature_matrix([m], "A", CFG)[0])[k] == pytest.approx(1.0, abs=1e-12)

    def test_one_width_offset(self):
        k = 4
        m = 10 ** (CFG.centers[k] + CFG.width)
        assert rbf_block(chain_feature_matrix([m], "A", CFG)[0])[k] == pytest.approx(math.exp(-0.5), rel=1e-10)

    def test_far_tail_negligible(self):
        m = 10 ** (CFG.center_hi + 6 * CFG.width)
        assert np.all(rbf_block(chain_feature_matrix([m], "A", CFG)[0]) < 1.6e-8)

    def test_unknown_monomer(self):
        with pytest.raises(VocabularyError):
            chain_feature_matrix([1e5], "B", CFG)

    def test_vocab_one_hot(self):
        cfg = EncoderConfig(monomer_vocab=("A", "B", "C"))
        assert chain_features(Chain(10, 1e3), "B", cfg)[:3].tolist() == [0.0, 1.0, 0.0]

    @pytest.mark.parametrize("kw", [dict(n_rbf=1), dict(center_lo=5, center_hi=4), dict(bandwidth=0),
                                    dict(monomer_vocab=())])
    def test_config_validation(self, kw):
        with pytest.raises(DomainError):
            EncoderConfig(**kw)


class TestPolySetEmbed:
    def test_single_chain(self):
        e = PolySetEnsemble([500], [1.0], 100.0)
        assert np.array_equal(polyset_embed(e, "A", CFG).values, chain_features(Chain(500, 5e4), "A", CFG))

    def test_identical_chains_collapse(self):
        e = PolySetEnsemble([500, 500], [0.3, 0.7], 100.0)
        expected = chain_features(Chain(500, 5e4), "A", CFG)
        assert polyset_embed(e, "A", CFG).values == pytest.approx(expected, rel=1e-15)

    def test_families_distinguished(self):
        a = polyset_embed(sample_grid(fit_mwd("lognormal", 1e6, 3, 100), 512), "A", CFG).values
        b = polyset_embed(sample_grid(fit_mwd("schulz_zimm", 1e6, 3, 100), 512), "A", CFG).values
        assert np.linalg.norm(a - b) > 1e-3

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 10**5), st.floats(1e-3, 1.0)), min_size=1, max_size=20))
    def test_is_weighted_mean_of_rows(self, chains):
        e = PolySetEnsemble.from_masses([c[0] * 100.0 for c in chains], [c[1] for c in chains], 100.0)
        v = polyset_embed(e, "A", CFG).values
        rows = np.array([chain_features(c, "A", CFG) for c in e.chains])
        assert v == pytest.approx(np.einsum("i,ij->j", e.weights, rows), rel=1e-12, abs=1e-300)
        assert v[0] == pytest.approx(1.0, rel=1e-12)
        assert np.all(rbf_block(v) >= 0) and np.all(rbf_block(v) <= 1 + 1e-12)


class TestBaseline:
    def test_construction(self):
        assert baseline_embed("A", 1e5, 2.0, CFG).values.tolist() == [1.0, 5.0, 2.0]

    def test_monodisperse_ok(self):
        assert baseline_embed("A", 1e5, 1.0, CFG).kind == BASELINE

    def test_family_blind(self):
        a = baseline_embed("A", 1e6, 3.0, CFG).values
        b = baseline_embed("A", 1e6, 3.0, CFG).values
        assert a.tobytes() == b.tobytes()

    def test_invalid(self):
        with pytest.raises(DomainError):
            baseline_embed("A", 1e5, 0.5, CFG)


def test_embeddings_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, CFG.dim()))
    write_embeddings(tmp_path / "e.jsonl", [3, 1, 4, 1, 5], M, CFG, "polyset")
    ids, back, cfg, kind = read_embeddings(tmp_path / "e.jsonl")
    assert ids == [3, 1, 4, 1, 5] and kind == "polyset" and cfg == CFG
    assert np.array_equal(back, M)
