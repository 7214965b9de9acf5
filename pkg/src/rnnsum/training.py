"""Training loops: extractive and abstractive objectives, adadelta, clipping.

Extractive mode minimizes the summed per-sentence binary cross-entropy of the
membership probabilities against 0/1 labels. Abstractive mode couples the
encoder to a teacher-forced GRU decoder whose only connection to the encoder
is the final running-summary state; the objective is the negative
log-likelihood of the reference-summary words. Batch gradients are the mean
of per-document gradients, clipped by global norm before each adadelta step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .corpus import BOS, Document, Vocabulary, encode, encode_summary
from .model import DecoderParams, ModelParams, forward, save_checkpoint

TRAIN_MODES = ("extractive", "abstractive")


class TrainingError(ValueError):
    pass


@dataclass
class TrainConfig:
    mode: str = "extractive"
    batch_size: int = 64
    max_epochs: int = 10
    patience: int = 3
    clip_norm: float = 5.0
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")


# ---------------------------------------------------------------------------
# losses


def extractive_loss(params: ModelParams, sent_ids: list[list[int]], labels: list[int]) -> ad.Node:
    """Summed binary cross-entropy over the document's sentences."""
    if labels is None:
        raise TrainingError("extractive_loss: document has no labels")
    if len(labels) != len(sent_ids):
        raise TrainingError(
            f"extractive_loss: {len(labels)} labels for {len(sent_ids)} sentences"
        )
    result = forward(params, sent_ids)
    loss = ad.bce_loss(result.probabilities[0], labels[0])
    for p, y in zip(result.probabilities[1:], labels[1:]):
        loss = ad.add(loss, ad.bce_loss(p, y))
    return loss


def decoder_forward(
    decoder: DecoderParams,
    embedding: ad.Node,
    s_last: ad.Node,
    reference: list[int],
    dec_hidden: int,
) -> ad.Node:
    """Teacher-forced decoder NLL of the reference words.

    The input at each step is the embedding of the previous reference word
    (begin-of-sequence first); the encoder's final summary state enters every
    gate and the emission layer as a fixed context vector.
    """
    if not reference:
        raise TrainingError("decoder_forward: empty reference")
    h = ad.constant(np.zeros(dec_hidden))
    x = ad.row(embedding, BOS)
    loss = None
    for w in reference:
        u = ad.sigmoid(
            ad.affine(decoder.b_u, (decoder.W_ux, x), (decoder.W_uh, h), (decoder.W_uc, s_last))
        )
        r = ad.sigmoid(
            ad.affine(decoder.b_r, (decoder.W_rx, x), (decoder.W_rh, h), (decoder.W_rc, s_last))
        )
        h_cand = ad.tanh(
            ad.affine(
                decoder.b_h,
                (decoder.W_hx, x),
                (decoder.W_hh, ad.hadamard(r, h)),
                (decoder.W_hc, s_last),
            )
        )
        h = ad.lerp(u, h, h_cand)
        f = ad.tanh(
            ad.affine(
                decoder.emit_b,
                (decoder.emit_Wh, h),
                (decoder.emit_Wx, x),
                (decoder.emit_Wc, s_last),
            )
        )
        logits = ad.affine(decoder.out_b, (decoder.out_W, f))
        term = ad.softmax_nll(logits, w)
        loss = term if loss is None else ad.add(loss, term)
        x = ad.row(embedding, w)
    return loss


def abstractive_loss(
    params: ModelParams, sent_ids: list[list[int]], reference: list[int]
) -> ad.Node:
    """Word NLL of the reference through the coupled decoder."""
    if params.decoder is None:
        raise TrainingError("abstractive_loss: model has no decoder parameters")
    result = forward(params, sent_ids)
    return decoder_forward(
        params.decoder, params.embedding, result.s_last, reference, params.config.dec_hidden
    )


# ---------------------------------------------------------------------------
# optimizer


def clip_gradients(store: ad.ParameterStore, clip_norm: float) -> float:
    """Scale all gradients by clip_norm/g when the global L2 norm g exceeds it."""
    total = 0.0
    for _, node in store.items():
        total += float((node.grad * node.grad).sum())
    norm = math.sqrt(total)
    if norm > clip_norm:
        factor = clip_norm / norm
        for _, node in store.items():
            node.grad *= factor
    return norm


def adadelta_step(store: ad.ParameterStore, rho: float = 0.95, eps: float = 1e-6) -> None:
    """Accumulate E[g^2], apply RMS-ratio update, accumulate E[delta^2]."""
    for name, node in store.items():
        g = node.grad
        sq_g = store.sq_grad[name]
        sq_d = store.sq_delta[name]
        sq_g *= rho
        sq_g += (1.0 - rho) * g * g
        delta = -np.sqrt((sq_d + eps) / (sq_g + eps)) * g
        sq_d *= rho
        sq_d += (1.0 - rho) * delta * delta
        node.value += delta


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    valid_loss: float
    train_perplexity: float | None = None


@dataclass
class TrainReport:
    mode: str
    epochs: list[EpochStats]
    best_epoch: int
    stopped_epoch: int
    best_checkpoint: str
    final_checkpoint: str
    final_train_accuracy: float | None = None
    final_train_perplexity: float | None = None

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "valid_loss": e.valid_loss,
                    **(
                        {"train_perplexity": e.train_perplexity}
                        if e.train_perplexity is not None
                        else {}
                    ),
                }
                for e in self.epochs
            ],
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "best_checkpoint": self.best_checkpoint,
            "final_checkpoint": self.final_checkpoint,
        }
        if self.final_train_accuracy is not None:
            payload["final_train_accuracy"] = self.final_train_accuracy
        if self.final_train_perplexity is not None:
            payload["final_train_perplexity"] = self.final_train_perplexity
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass
class _Example:
    doc_id: str
    sent_ids: list[list[int]]
    labels: list[int] | None
    reference: list[int] | None

    @property
    def n_words(self) -> int:
        return len(self.reference or [])


def _prepare(docs: list[Document], vocab: Vocabulary, mode: str, role: str) -> list[_Example]:
    examples = []
    for doc in docs:
        if mode == "extractive" and doc.labels is None:
            raise TrainingError(f"{role} document {doc.doc_id!r} lacks extractive labels")
        if mode == "abstractive" and doc.summary is None:
            raise TrainingError(f"{role} document {doc.doc_id!r} lacks a reference summary")
        examples.append(
            _Example(
                doc.doc_id,
                encode(doc, vocab),
                doc.labels,
                encode_summary(doc, vocab) if doc.summary is not None else None,
            )
        )
    return examples


def _example_loss(params: ModelParams, ex: _Example, mode: str) -> ad.Node:
    if mode == "extractive":
        return extractive_loss(params, ex.sent_ids, ex.labels)
    return abstractive_loss(params, ex.sent_ids, ex.reference)


def _validation_loss(params: ModelParams, examples: list[_Example], mode: str) -> float:
    """Mean per-document loss with parameters frozen (no gradient step)."""
    total = 0.0
    for ex in examples:
        total += float(_example_loss(params, ex, mode).value)
    return total / len(examples)


def sentence_accuracy(params: ModelParams, examples: list[_Example], threshold=0.5) -> float:
    """Fraction of sentences whose thresholded probability matches the label."""
    correct = total = 0
    for ex in examples:
        probs = forward(params, ex.sent_ids).probability_values()
        for p, y in zip(probs, ex.labels):
            correct += int((p >= threshold) == bool(y))
            total += 1
    return correct / total if total else 0.0


def train(
    store: ad.ParameterStore,
    params: ModelParams,
    vocab: Vocabulary,
    train_docs: list[Document],
    valid_docs: list[Document],
    config: TrainConfig,
    out_dir: str | Path,
) -> TrainReport:
    """Run epochs with shuffled mean-gradient batches and early stopping.

    Writes the best-validation and final checkpoints plus a JSON report into
    out_dir; all randomness comes from config.seed.
    """
    if config.mode == "abstractive" and params.decoder is None:
        raise TrainingError("abstractive mode requires decoder_enabled in the model config")
    train_ex = _prepare(train_docs, vocab, config.mode, "training")
    valid_ex = _prepare(valid_docs, vocab, config.mode, "validation")
    if not train_ex:
        raise TrainingError("empty training corpus")
    if not valid_ex:
        raise TrainingError("empty validation corpus")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best_path = out_dir / "checkpoint_best.json"
    final_path = out_dir / "checkpoint_final.json"

    rng = np.random.default_rng([config.seed, 1])
    grad_acc = {name: np.zeros_like(node.value) for name, node in store.items()}

    epochs: list[EpochStats] = []
    best_valid = math.inf
    best_epoch = 0
    stale = 0
    stopped = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_ex))
        epoch_loss = 0.0
        epoch_words = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_ex[i] for i in order[start : start + config.batch_size]]
            for acc in grad_acc.values():
                acc[...] = 0.0
            for ex in batch:
                store.zero_grad()
                loss = _example_loss(params, ex, config.mode)
                ad.backward(loss)
                for name, node in store.items():
                    grad_acc[name] += node.grad
                epoch_loss += float(loss.value)
                epoch_words += ex.n_words
            inv = 1.0 / len(batch)
            for name, node in store.items():
                node.grad[...] = grad_acc[name] * inv
            clip_gradients(store, config.clip_norm)
            adadelta_step(store, config.adadelta_rho, config.adadelta_eps)

        valid_loss = _validation_loss(params, valid_ex, config.mode)

        train_loss = epoch_loss / len(train_ex)
        perplexity = (
            math.exp(epoch_loss / epoch_words) if config.mode == "abstractive" else None
        )
        epochs.append(EpochStats(epoch, train_loss, valid_loss, perplexity))

        if valid_loss < best_valid:
            best_valid = valid_loss
            best_epoch = epoch
            stale = 0
            save_checkpoint(best_path, store, params.config, vocab)
        else:
            stale += 1
        stopped = epoch
        if stale >= config.patience:
            break

    save_checkpoint(final_path, store, params.config, vocab)

    report = TrainReport(
        mode=config.mode,
        epochs=epochs,
        best_epoch=best_epoch,
        stopped_epoch=stopped,
        best_checkpoint=best_path.name,
        final_checkpoint=final_path.name,
    )
    if config.mode == "extractive":
        report.final_train_accuracy = sentence_accuracy(params, train_ex)
    else:
        total_nll = total_words = 0.0
        for ex in train_ex:
            total_nll += float(_example_loss(params, ex, config.mode).value)
            total_words += ex.n_words
        report.final_train_perplexity = math.exp(total_nll / total_words)
    (out_dir / "training_report.json").write_text(report.to_json(), encoding="utf-8")
    return report
