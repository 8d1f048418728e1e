"""Training loops, evaluation protocol, and checkpointing.

Recordings are expanded into clips (labels inherited from the recording),
models are trained on clips, and recordings are scored by averaging clip
softmax probabilities. Everything is seeded and single-process so a fixed
seed reproduces runs bit-identically.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import random
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, TrainingDivergedError
from .gaze_core import CLIP_LEN, Recording, clip_feature_rows, segment_clips
from .student import DistillProjections, SkillStudent, StudentConfig, distillation_loss
from .teacher import SkillTeacher, TeacherConfig


def set_seed(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


@dataclass
class ClipBatch:
    gaze_feats: torch.Tensor  # (b, 16, FEATURE_DIM)
    g2d: torch.Tensor  # (b, 16, 2) raw clamped gaze projections
    frames: torch.Tensor | None  # (b, 16, 3, s, s) float in [0,1]
    scenario_idx: torch.Tensor  # (b,)
    skill: torch.Tensor  # (b,)
    subtask_idx: torch.Tensor  # (b,)


class ClipDataset:
    """Materialized clips of a recording list, ready for batching."""

    def __init__(
        self,
        recordings: list[Recording],
        n_clips: int = 10,
        with_frames: bool = True,
        scenario_vocab: list[str] | None = None,
        subtask_vocab: list[str] | None = None,
    ):
        self.recordings = recordings
        self.scenario_vocab = scenario_vocab or sorted({r.scenario for r in recordings})
        self.subtask_vocab = subtask_vocab or sorted({r.subtask for r in recordings})
        s_map = {s: i for i, s in enumerate(self.scenario_vocab)}
        a_map = {a: i for i, a in enumerate(self.subtask_vocab)}

        feats, g2ds, frames, scen, skill, subt = [], [], [], [], [], []
        self.rec_ids: list[str] = []
        self.clip_ids: list[str] = []
        self.rec_index: list[int] = []
        for ri, rec in enumerate(recordings):
            if rec.scenario not in s_map:
                raise ConfigError(f"scenario '{rec.scenario}' not in model vocabulary")
            for ci, clip in enumerate(segment_clips(rec, n_clips)):
                feats.append(clip_feature_rows(clip.gaze, up_axis=rec.up_axis))
                g2ds.append(
                    np.clip(np.stack([s.g2d for s in clip.gaze]), 0.0, 1.0)
                )
                if with_frames:
                    if clip.frames is None:
                        raise ConfigError(
                            f"recording {rec.id} has no frames but the model needs video"
                        )
                    frames.append(clip.frames)
                scen.append(s_map[rec.scenario])
                skill.append(rec.skill)
                subt.append(a_map.get(rec.subtask, 0))
                self.rec_ids.append(rec.id)
                self.clip_ids.append(f"{rec.id}:{ci:03d}")
                self.rec_index.append(ri)

        self.gaze_feats = torch.tensor(np.stack(feats), dtype=torch.float32)
        self.g2d = torch.tensor(np.stack(g2ds), dtype=torch.float32)
        self.frames = (
            torch.tensor(np.stack(frames), dtype=torch.uint8) if with_frames else None
        )
        self.scenario_idx = torch.tensor(scen, dtype=torch.long)
        self.skill = torch.tensor(skill, dtype=torch.long)
        self.subtask_idx = torch.tensor(subt, dtype=torch.long)
        self.rec_index_arr = np.array(self.rec_index)

    def __len__(self) -> int:
        return len(self.skill)

    def batch(self, idx: np.ndarray) -> ClipBatch:
        idx_t = torch.as_tensor(np.ascontiguousarray(idx), dtype=torch.long)
        frames = None
        if self.frames is not None:
            frames = (
                self.frames[idx_t].to(torch.float32).div(255.0).permute(0, 1, 4, 2, 3)
            )
        return ClipBatch(
            gaze_feats=self.gaze_feats[idx_t],
            g2d=self.g2d[idx_t],
            frames=frames,
            scenario_idx=self.scenario_idx[idx_t],
            skill=self.skill[idx_t],
            subtask_idx=self.subtask_idx[idx_t],
        )

    def batches(self, batch_size: int, rng: np.random.Generator | None = None):
        order = np.arange(len(self))
        if rng is not None:
            rng.shuffle(order)
        for i in range(0, len(order), batch_size):
            yield self.batch(order[i : i + batch_size])


def _check_finite_loss(loss: torch.Tensor, context: str) -> None:
    if not torch.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss ({loss.item()}) at {context}; "
            "lower the learning rate or inspect the input data"
        )


def pool_clip_probs(probs: np.ndarray) -> tuple[np.ndarray, int]:
    """Average clip probabilities; argmax with lowest-class-index tie-break."""
    mean = probs.mean(axis=0)
    return mean, int(np.argmax(mean))


def _recording_predictions(model, ds: ClipDataset, batch_size: int = 32):
    """Per-recording averaged probabilities and predictions."""
    model.eval()
    chunks = []
    with torch.no_grad():
        for b in ds.batches(batch_size):
            chunks.append(torch.softmax(model.clip_logits(b), dim=-1).numpy())
    probs = np.concatenate(chunks, axis=0)
    n_rec = len(ds.recordings)
    preds = np.zeros(n_rec, dtype=int)
    mean_probs = []
    for ri in range(n_rec):
        p, pred = pool_clip_probs(probs[ds.rec_index_arr == ri])
        preds[ri] = pred
        mean_probs.append(p)
    return np.stack(mean_probs), preds


def _recording_accuracy(model, ds: ClipDataset, batch_size: int = 32) -> float:
    _, preds = _recording_predictions(model, ds, batch_size)
    labels = np.array([r.skill for r in ds.recordings])
    return float((preds == labels).mean())


def majority_vote(labels: np.ndarray, scenarios: list[str]) -> dict:
    """Accuracy of predicting each scenario's most frequent class.

    Returns the empirical mode frequency per scenario and overall.
    """
    labels = np.asarray(labels)
    scen = np.asarray(scenarios)
    per = {}
    hits = 0
    for s in sorted(set(scen)):
        sub = labels[scen == s]
        counts = np.bincount(sub)
        per[s] = float(counts.max() / len(sub))
        hits += int(counts.max())
    return {"overall": float(hits / len(labels)), "per_scenario": per}


@dataclass
class EvalReport:
    overall_acc: float
    per_scenario: dict[str, float]
    confusion: list[list[int]]  # [true][pred]
    majority: dict
    predictions: dict[str, int]
    n_recordings: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def evaluate(model, recordings: list[Recording], n_clips: int = 10, batch_size: int = 32) -> EvalReport:
    """Recording-level evaluation: clip probability averaging + majority baseline."""
    needs_frames = isinstance(model, SkillTeacher)
    ds = ClipDataset(
        recordings,
        n_clips=n_clips,
        with_frames=needs_frames,
        scenario_vocab=model.scenarios if needs_frames else None,
    )
    _, preds = _recording_predictions(model, ds, batch_size)
    labels = np.array([r.skill for r in recordings])
    scen = [r.scenario for r in recordings]
    k = max(r.k_classes for r in recordings)
    confusion = np.zeros((k, k), dtype=int)
    for t, p in zip(labels, preds):
        confusion[t, p] += 1
    per_scenario = {}
    for s in sorted(set(scen)):
        mask = np.array([x == s for x in scen])
        per_scenario[s] = float((preds[mask] == labels[mask]).mean())
    return EvalReport(
        overall_acc=float((preds == labels).mean()),
        per_scenario=per_scenario,
        confusion=confusion.tolist(),
        majority=majority_vote(labels, scen),
        predictions={r.id: int(p) for r, p in zip(recordings, preds)},
        n_recordings=len(recordings),
    )


def _split(recordings: list[Recording]):
    train = [r for r in recordings if r.split == "train"]
    val = [r for r in recordings if r.split == "val"]
    if not train:
        raise ConfigError("dataset has no train split")
    if not val:
        warnings.warn("no val split; using the train split for validation")
        val = train
    return train, val


def _write_metrics(out_dir: Path, rows: list[dict]) -> None:
    with open(out_dir / "metrics.jsonl", "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


@dataclass
class TrainResult:
    checkpoint_path: Path
    best_epoch: int
    best_val_acc: float
    metrics: list[dict]


def _config_to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def train_teacher(
    recordings: list[Recording],
    cfg: TeacherConfig,
    out_dir: str | Path,
    n_clips: int = 10,
    early_stop_acc: float | None = None,
) -> TrainResult:
    """Cross-entropy training of the teacher; keeps the best-val checkpoint.

    ``early_stop_acc`` ends training once validation accuracy reaches the
    threshold (and the epoch-0 loss has at least halved), saving CPU time
    on tasks the model solves quickly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_recs, val_recs = _split(recordings)
    if len({r.skill for r in train_recs}) < 2:
        warnings.warn("training set has a single skill class; majority baseline is degenerate")

    set_seed(cfg.seed)
    scenarios = sorted({r.scenario for r in recordings})
    model = SkillTeacher(cfg, scenarios=scenarios)
    train_ds = ClipDataset(train_recs, n_clips, with_frames=True, scenario_vocab=scenarios)
    val_ds = ClipDataset(val_recs, n_clips, with_frames=True, scenario_vocab=scenarios)

    opt = torch.optim.SGD(
        model.parameters(), lr=cfg.optimizer.lr, momentum=cfg.optimizer.momentum
    )
    rng = np.random.default_rng(cfg.seed)
    ckpt_path = out_dir / "teacher.pt"
    best_acc, best_epoch = -1.0, -1
    rows = []
    for epoch in range(cfg.optimizer.epochs):
        model.train()
        losses, hits, seen = [], 0, 0
        for step, batch in enumerate(train_ds.batches(cfg.optimizer.batch_size, rng)):
            out = model(batch)
            loss = nn.functional.cross_entropy(out.logits, batch.skill)
            _check_finite_loss(loss, f"epoch {epoch} step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
            hits += int((out.logits.argmax(-1) == batch.skill).sum())
            seen += len(batch.skill)
        val_acc = _recording_accuracy(model, val_ds)
        rows.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "train_acc": hits / seen,
                "val_acc": val_acc,
            }
        )
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            save_teacher_checkpoint(ckpt_path, model, cfg, best_epoch=epoch)
        if (
            early_stop_acc is not None
            and val_acc >= early_stop_acc
            and rows[-1]["train_loss"] <= 0.5 * rows[0]["train_loss"]
        ):
            break
    _write_metrics(out_dir, rows)
    return TrainResult(ckpt_path, best_epoch, best_acc, rows)


def save_teacher_checkpoint(path: Path, model: SkillTeacher, cfg: TeacherConfig, best_epoch: int) -> None:
    torch.save(
        {
            "kind": "teacher",
            "config": _config_to_dict(cfg),
            "scenarios": model.scenarios,
            "state_dict": model.state_dict(),
            "lambda_by_scenario": model.lambda_by_scenario,
            "best_epoch": best_epoch,
        },
        path,
    )


def load_checkpoint(path: str | Path) -> dict:
    return torch.load(path, map_location="cpu", weights_only=False)


def build_teacher_from_checkpoint(ckpt: dict) -> SkillTeacher:
    from .config import build_dataclass

    if ckpt.get("kind") != "teacher":
        raise ConfigError("checkpoint is not a teacher checkpoint")
    cfg = build_dataclass(TeacherConfig, ckpt["config"])
    model = SkillTeacher(cfg, scenarios=ckpt["scenarios"])
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model


def build_student_from_checkpoint(ckpt: dict) -> SkillStudent:
    from .config import build_dataclass

    if ckpt.get("kind") != "student":
        raise ConfigError("checkpoint is not a student checkpoint")
    cfg = build_dataclass(StudentConfig, ckpt["config"])
    model = SkillStudent(cfg)
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model


def _file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def compute_teacher_embeddings(
    teacher: SkillTeacher,
    ds: ClipDataset,
    cache_dir: str | Path | None = None,
    cache_key: str | None = None,
    batch_size: int = 16,
) -> torch.Tensor:
    """Concatenated teacher embeddings per clip, optionally disk-cached.

    Cache entries are keyed by (teacher checkpoint hash, clip id) and
    written atomically so parallel runs can share a cache directory.
    """
    cache = None
    if cache_dir is not None:
        if cache_key is None:
            raise ConfigError("cache_dir given without cache_key")
        cache = Path(cache_dir) / cache_key
        cache.mkdir(parents=True, exist_ok=True)

    teacher.eval()
    n = len(ds)
    out: list[torch.Tensor | None] = [None] * n
    missing = []
    if cache is not None:
        for i, cid in enumerate(ds.clip_ids):
            p = cache / f"{cid}.npy"
            if p.exists():
                out[i] = torch.from_numpy(np.load(p))
            else:
                missing.append(i)
    else:
        missing = list(range(n))

    with torch.no_grad():
        for i0 in range(0, len(missing), batch_size):
            idx = np.array(missing[i0 : i0 + batch_size])
            emb = teacher(ds.batch(idx)).concat()
            for j, i in enumerate(idx):
                out[i] = emb[j]
                if cache is not None:
                    p = cache / f"{ds.clip_ids[i]}.npy"
                    tmp = p.with_suffix(".tmp.npy")
                    np.save(tmp, emb[j].numpy())
                    os.replace(tmp, p)
    return torch.stack([t for t in out])  # type: ignore[arg-type]


def student_loss_terms(
    out,
    batch: ClipBatch,
    teacher_feats: torch.Tensor | None,
    proj: DistillProjections | None,
    cfg: StudentConfig,
) -> dict[str, torch.Tensor]:
    """The three training-loss terms and their weighted total."""
    zero = torch.zeros(())
    ce = nn.functional.cross_entropy(out.skill_logits, batch.skill)
    dis = zero
    if cfg.lambda_dis > 0:
        if teacher_feats is None or proj is None:
            raise ConfigError("distillation enabled but no teacher features given")
        dis = distillation_loss(out.e_s_hat, teacher_feats, proj)
    act = zero
    if cfg.lambda_act > 0:
        act = nn.functional.cross_entropy(out.action_logits, batch.subtask_idx)
    total = ce + cfg.lambda_dis * dis + cfg.lambda_act * act
    return {"ce": ce, "dis": dis, "act": act, "total": total}


def train_student(
    recordings: list[Recording],
    cfg: StudentConfig,
    out_dir: str | Path,
    teacher_ckpt: str | Path | None = None,
    cache_dir: str | Path | None = None,
    n_clips: int = 10,
) -> TrainResult:
    """Distillation training of the gaze-only student.

    With ``lambda_dis == 0`` no teacher is needed and the run reproduces the
    gaze-only cross-entropy baseline exactly (the projection layers are
    initialized from a forked RNG stream, so their presence does not perturb
    the student's parameter trajectory).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_recs, val_recs = _split(recordings)

    subtasks = sorted({r.subtask for r in recordings})
    if cfg.lambda_act > 0 and any(not r.subtask for r in train_recs):
        raise ConfigError("action loss enabled but subtask labels are missing")
    cfg.n_subtasks = max(cfg.n_subtasks, len(subtasks))

    k_data = max(r.k_classes for r in recordings)
    if cfg.k_classes != k_data:
        raise ConfigError(
            f"student k_classes={cfg.k_classes} but dataset has {k_data} classes"
        )

    teacher = None
    if cfg.lambda_dis > 0:
        if teacher_ckpt is None:
            raise ConfigError("distillation enabled but no teacher checkpoint given")
        ckpt = load_checkpoint(teacher_ckpt)
        teacher = build_teacher_from_checkpoint(ckpt)
        if teacher.cfg.k_classes != cfg.k_classes:
            raise ConfigError(
                f"teacher k_classes={teacher.cfg.k_classes} != student {cfg.k_classes}"
            )

    set_seed(cfg.seed)
    model = SkillStudent(cfg)
    with torch.random.fork_rng():
        torch.manual_seed(cfg.seed ^ 0x5EED)
        teacher_dim = sum(teacher.embed_dims) if teacher is not None else 3 * cfg.width
        proj = DistillProjections(cfg.width, teacher_dim, cfg.common_dim)

    train_ds = ClipDataset(train_recs, n_clips, with_frames=False, subtask_vocab=subtasks)
    val_ds = ClipDataset(val_recs, n_clips, with_frames=False, subtask_vocab=subtasks)

    teacher_feats = None
    if teacher is not None:
        # the teacher consumes frames, so rebuild the train clips with video
        t_ds = ClipDataset(
            train_recs,
            n_clips,
            with_frames=True,
            scenario_vocab=teacher.scenarios,
            subtask_vocab=subtasks,
        )
        key = _file_hash(teacher_ckpt)
        teacher_feats = compute_teacher_embeddings(teacher, t_ds, cache_dir, key)
        teacher_snapshot = {
            k: v.clone() for k, v in teacher.state_dict().items()
        }

    params = list(model.parameters())
    if cfg.lambda_dis > 0:
        params += list(proj.parameters())
    opt = torch.optim.AdamW(params, lr=cfg.optimizer.lr)
    rng = np.random.default_rng(cfg.seed)

    ckpt_path = out_dir / "student.pt"
    best_acc, best_epoch = -1.0, -1
    rows = []
    order_src = np.arange(len(train_ds))
    for epoch in range(cfg.optimizer.epochs):
        model.train()
        sums = {"ce": 0.0, "dis": 0.0, "act": 0.0, "total": 0.0}
        hits, seen, steps = 0, 0, 0
        order = order_src.copy()
        rng.shuffle(order)
        for i0 in range(0, len(order), cfg.optimizer.batch_size):
            idx = order[i0 : i0 + cfg.optimizer.batch_size]
            batch = train_ds.batch(idx)
            out = model(batch.gaze_feats)
            tf = teacher_feats[torch.as_tensor(idx)] if teacher_feats is not None else None
            terms = student_loss_terms(out, batch, tf, proj, cfg)
            _check_finite_loss(terms["total"], f"epoch {epoch} step {steps}")
            opt.zero_grad()
            terms["total"].backward()
            opt.step()
            for k in sums:
                sums[k] += float(terms[k])
            hits += int((out.skill_logits.argmax(-1) == batch.skill).sum())
            seen += len(idx)
            steps += 1
        val_acc = _recording_accuracy(model, val_ds)
        rows.append(
            {
                "epoch": epoch,
                "loss": sums["total"] / steps,
                "loss_ce": sums["ce"] / steps,
                "loss_dis": sums["dis"] / steps,
                "loss_act": sums["act"] / steps,
                "train_acc": hits / seen,
                "val_acc": val_acc,
            }
        )
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            torch.save(
                {
                    "kind": "student",
                    "config": _config_to_dict(cfg),
                    "subtasks": subtasks,
                    "state_dict": model.state_dict(),
                    "proj_state_dict": proj.state_dict(),
                    "best_epoch": epoch,
                },
                ckpt_path,
            )

    if teacher is not None:
        after = teacher.state_dict()
        mutated = [
            k for k, v in teacher_snapshot.items() if not torch.equal(v, after[k])
        ]
        if mutated:  # pragma: no cover - guards the frozen-teacher contract
            raise TrainingDivergedError(f"teacher parameters changed: {mutated[:3]}")

    _write_metrics(out_dir, rows)
    return TrainResult(ckpt_path, best_epoch, best_acc, rows)
