import itertools

import numpy as np
import pytest

from upvkit.embeddings import EmbeddingTable
from upvkit.model import (
    CheckpointError,
    Model,
    ModelConfig,
    count_params,
    load_checkpoint,
    save_checkpoint,
)
from upvkit.neuralcore import backward, grad_check, weighted_bce


def toy_config(**kw):
    base = dict(
        use_attention=True,
        use_description=True,
        heads="t1t2t3",
        emb_dim=8,
        hidden=5,
        head_hidden=4,
        max_sample_len=6,
        max_descr_len=5,
        dropout=0.2,
    )
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture
def toy_table():
    return EmbeddingTable.empty(dim=8, oov_policy="random_fixed")


@pytest.fixture
def toy_model(tiny_tax, toy_table):
    return Model.build(toy_config(), tiny_tax, toy_table, list(tiny_tax.t3_ids), seed=0)


BATCH = [
    (["the", "cow", "gives", "milk", "daily"], "aspiration"),
    (["school", "fees", "are", "heavy"], "comfort"),
    (["we", "pray"], "dignity"),
]


class TestForward:
    def test_scores_in_unit_interval(self, tiny_tax, toy_table):
        rng = np.random.default_rng(0)
        model = Model.build(toy_config(), tiny_tax, toy_table, list(tiny_tax.t3_ids), seed=1)
        labels = list(tiny_tax.t3_ids)
        for _ in range(40):
            n = int(rng.integers(2, 9))
            tokens = [f"tok{int(i)}" for i in rng.integers(0, 50, n)]
            label = labels[int(rng.integers(len(labels)))]
            scores = model.forward(tokens, label)
            for level in ("t1", "t2", "t3"):
                assert 0.0 < scores[level] < 1.0

    def test_levels_by_head_setting(self, tiny_tax, toy_table):
        for heads, expect in [("t3", {"t3"}), ("t2t3", {"t2", "t3"}), ("t1t2t3", {"t1", "t2", "t3"})]:
            model = Model.build(toy_config(heads=heads), tiny_tax, toy_table, list(tiny_tax.t3_ids))
            scores = model.forward(["one", "two", "three"], "comfort")
            assert set(scores) == expect

    def test_infer_deterministic(self, toy_model):
        a = toy_model.forward(["one", "two", "three"], "safety")
        b = toy_model.forward(["one", "two", "three"], "safety")
        assert a == b

    def test_train_mode_needs_rng(self, toy_model):
        with pytest.raises(ValueError, match="rng"):
            toy_model.forward_batch([["a", "b"]], ["safety"], mode="train")

    def test_unknown_label_rejected(self, toy_model):
        with pytest.raises(ValueError, match="trained labels"):
            toy_model.forward(["a", "b"], "nonexistent")

    def test_untrained_label_rejected(self, tiny_tax, toy_table):
        model = Model.build(toy_config(), tiny_tax, toy_table, ["safety"], seed=0)
        with pytest.raises(ValueError, match="trained labels"):
            model.forward(["a", "b"], "comfort")

    def test_empty_tokens_rejected(self, toy_model):
        with pytest.raises(ValueError, match="empty token"):
            toy_model.forward([], "safety")

    def test_batch_composition_does_not_change_scores(self, toy_model):
        alone = toy_model.forward_batch([BATCH[2][0]], [BATCH[2][1]])
        together = toy_model.forward_batch([t for t, _ in BATCH], [l for _, l in BATCH])
        for level in ("t1", "t2", "t3"):
            np.testing.assert_allclose(together[level].data[2], alone[level].data[0], atol=1e-12)

    def test_attention_toggle_keeps_output_shape(self, tiny_tax, toy_table):
        for use_att in (False, True):
            model = Model.build(toy_config(use_attention=use_att), tiny_tax, toy_table, list(tiny_tax.t3_ids))
            scores = model.forward_batch([["a", "b", "c"]], ["safety"])
            assert scores["t3"].data.shape == (1,)

    def test_description_off_uses_text_only(self, tiny_tax, toy_table):
        model = Model.build(
            toy_config(use_description=False, use_attention=False, heads="t3"),
            tiny_tax,
            toy_table,
            list(tiny_tax.t3_ids),
        )
        assert model.config.pooled_dim == model.config.hidden
        assert model.att_descr is None


class TestParameterCounts:
    def test_full_dims_text_variant(self, tiny_tax):
        table = EmbeddingTable.empty(dim=300, oov_policy="random_fixed")
        cfg = ModelConfig(
            use_attention=False, use_description=False, heads="t3", emb_dim=300, hidden=128
        )
        model = Model.build(cfg, tiny_tax, table, list(tiny_tax.t3_ids))
        counts = count_params(model)
        assert counts["lstm"] == 4 * ((600 + 128) * 128 + 128)
        assert counts["total"] == 373_377

    def test_description_adds_no_lstm_params(self, tiny_tax):
        table = EmbeddingTable.empty(dim=300, oov_policy="random_fixed")
        base = ModelConfig(use_attention=False, use_description=False, heads="t3", emb_dim=300, hidden=128)
        with_descr = ModelConfig(use_attention=False, use_description=True, heads="t3", emb_dim=300, hidden=128)
        a = Model.build(base, tiny_tax, table, list(tiny_tax.t3_ids))
        b = Model.build(with_descr, tiny_tax, table, list(tiny_tax.t3_ids))
        assert count_params(a)["lstm"] == count_params(b)["lstm"]
        # the only growth is the doubled head input
        assert count_params(b)["total"] - count_params(a)["total"] == 128

    def test_hand_countable_minimal_model(self, tiny_tax):
        table = EmbeddingTable.empty(dim=1, oov_policy="random_fixed")
        cfg = ModelConfig(use_attention=False, use_description=False, heads="t3", emb_dim=1, hidden=1)
        model = Model.build(cfg, tiny_tax, table, list(tiny_tax.t3_ids))
        assert count_params(model)["total"] == 4 * ((2 + 1) * 1 + 1) + 2 == 18


class TestGradients:
    def loss_fn(self, model, rng_batch):
        tokens, labels, targets, weights = rng_batch

        def fn():
            scores = model.forward_batch(tokens, labels, mode="infer")
            losses = [
                weighted_bce(scores[level], targets[level], weights) for level in model.config.levels
            ]
            total = losses[0]
            for extra in losses[1:]:
                total = total + extra
            return total

        return fn

    def make_batch(self, tax, seed):
        rng = np.random.default_rng(seed)
        labels_pool = list(tax.t3_ids)
        tokens, labels = [], []
        for _ in range(3):
            n = int(rng.integers(2, 7))
            tokens.append([f"w{int(i)}" for i in rng.integers(0, 30, n)])
            labels.append(labels_pool[int(rng.integers(len(labels_pool)))])
        targets = {
            level: rng.integers(0, 2, size=3).astype(float) for level in ("t1", "t2", "t3")
        }
        weights = np.where(rng.random(3) < 0.3, 0.5, 1.0)
        return tokens, labels, targets, weights

    @pytest.mark.parametrize(
        "use_att,use_descr,heads",
        list(itertools.product([False, True], [False, True], ["t3", "t2t3", "t1t2t3"])),
    )
    def test_all_variants_match_finite_differences(self, tiny_tax, toy_table, use_att, use_descr, heads):
        cfg = toy_config(use_attention=use_att, use_description=use_descr, heads=heads)
        model = Model.build(cfg, tiny_tax, toy_table, list(tiny_tax.t3_ids), seed=3)
        batch = self.make_batch(tiny_tax, seed=17)
        report = grad_check(self.loss_fn(model, batch), dict(model.named_params()), eps=1e-5)
        assert report.max_rel_error <= 1e-4, (report.worst_group, report.per_group)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, toy_model, tiny_tax, toy_table, tmp_path):
        path = str(tmp_path / "model.ckpt")
        toy_model.thresholds = {t: 0.5 for t in tiny_tax.t3_ids}
        toy_model.metadata = {"seed": 0, "epochs_run": 3, "dev_loss": 0.25}
        save_checkpoint(toy_model, path)
        loaded = load_checkpoint(path, tiny_tax, toy_table)
        for (name_a, ta), (name_b, tb) in zip(toy_model.named_params(), loaded.named_params()):
            assert name_a == name_b
            assert ta.data.tobytes() == tb.data.tobytes()
        assert loaded.thresholds == toy_model.thresholds
        assert loaded.metadata == toy_model.metadata
        assert count_params(loaded) == count_params(toy_model)

    def test_forward_identical_after_reload(self, toy_model, tiny_tax, toy_table, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(toy_model, path)
        loaded = load_checkpoint(path, tiny_tax, toy_table)
        a = toy_model.forward(["one", "two", "three"], "safety")
        b = loaded.forward(["one", "two", "three"], "safety")
        assert a == b

    def test_corruption_detected(self, toy_model, tiny_tax, toy_table, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(toy_model, path)
        blob = bytearray(open(path, "rb").read())
        blob[len(blob) // 2] ^= 0xFF
        open(path, "wb").write(bytes(blob))
        with pytest.raises(CheckpointError, match="digest"):
            load_checkpoint(path, tiny_tax, toy_table)

    def test_not_a_checkpoint(self, tiny_tax, toy_table, tmp_path):
        path = str(tmp_path / "junk.bin")
        open(path, "wb").write(b"junkjunkjunk")
        with pytest.raises(CheckpointError):
            load_checkpoint(path, tiny_tax, toy_table)


class TestCascadeStructure:
    def test_dimension_audit(self, tiny_tax, toy_table):
        cfg = toy_config(heads="t1t2t3")
        model = Model.build(cfg, tiny_tax, toy_table, list(tiny_tax.t3_ids))
        d = cfg.pooled_dim
        hh = cfg.head_hidden
        assert model.heads["t1"].hid_w.shape == (d, hh)
        assert model.heads["t2"].hid_w.shape == (d + hh, hh)
        assert model.heads["t3"].hid_w.shape == (d + hh, hh)

    def test_t2t3_starts_at_t2(self, tiny_tax, toy_table):
        cfg = toy_config(heads="t2t3")
        model = Model.build(cfg, tiny_tax, toy_table, list(tiny_tax.t3_ids))
        d = cfg.pooled_dim
        assert model.heads["t2"].hid_w.shape == (d, cfg.head_hidden)
        assert model.heads["t3"].hid_w.shape == (d + cfg.head_hidden, cfg.head_hidden)
