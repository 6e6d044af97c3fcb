"""End-to-end driver: cached extraction and the repeated-trial protocol.

Extraction computes raw per-segment features once and caches them; each
evaluation trial re-splits the data, fits every data-dependent model
(standardizers, codebooks, projections, background GMM, kernel widths)
on the training split only, and scores the held-out split. A per-trial
audit log records which segments each phase touched so leak-freedom is
checkable rather than assumed.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio import load_audio, map_adapt, mfcc, supervector, train_ubm
from .cache import FeatureTable, read_feature_table, write_feature_table
from .config import ExperimentConfig
from .cuboid import compute_cuboids
from .encoding import (
    CodebookEncoder,
    PcaReducer,
    standardize_apply,
    standardize_fit,
)
from .flow import flow_sequence
from .frames import FrameError, load_frames
from .goff import compute_goff
from .kernels import (
    KernelSpec,
    cross_gram,
    normalize,
    rbf_gamma,
    self_similarities,
)
from .logc import compute_logc_windows
from .manifest import DatasetManifest, stratified_split
from .metrics import MetricsReport, compute_report, confusion
from .vif import compute_vif
from .mkboost import MKBoostClassifier
from .mkl import SimpleMKLClassifier
from .svm import KernelSVC


class PipelineError(RuntimeError):
    pass


class ExtractionError(PipelineError):
    pass


class TrialsFailedError(PipelineError):
    def __init__(self, message: str, outcome: "RunOutcome"):
        super().__init__(message)
        self.outcome = outcome


def _seed_for(master: int, trial: int, tag: str) -> np.random.SeedSequence:
    return np.random.SeedSequence((master, trial, zlib.crc32(tag.encode())))


def _seed_int(master: int, trial: int, tag: str) -> int:
    return int(_seed_for(master, trial, tag).generate_state(1)[0])


class AuditLog:
    """Segment-id access record, bucketed by pipeline phase."""

    def __init__(self):
        self.phase = "fit"
        self.accesses: dict[str, set[str]] = {"fit": set(), "eval": set()}

    def set_phase(self, phase: str) -> None:
        if phase not in self.accesses:
            raise ValueError(f"unknown phase {phase!r}")
        self.phase = phase

    def record(self, segment_id: str) -> None:
        self.accesses[self.phase].add(segment_id)

    def violations(self, test_ids) -> list[str]:
        return sorted(self.accesses["fit"] & set(test_ids))


# ---------------------------------------------------------------------------
# extraction

def _extract_segment(segment, channels) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    need_frames = any(c in channels for c in ("GOFF", "VIF", "LogC", "Cuboid"))
    frames = load_frames(segment.frame_dir) if need_frames else None
    flows = None
    if "GOFF" in channels or "LogC" in channels:
        flows = flow_sequence(frames)
    if "GOFF" in channels:
        out["GOFF"] = compute_goff(flows)[None, :]
    if "VIF" in channels:
        out["VIF"] = compute_vif(frames)[None, :]
    if "LogC" in channels:
        out["LogC"] = compute_logc_windows(frames, flows)
    if "Cuboid" in channels:
        out["Cuboid"] = compute_cuboids(frames).descriptors
    if "Audio" in channels:
        if segment.audio_path is None:
            out["AudioFrames"] = np.zeros((0, 39))
        else:
            signal = load_audio(segment.audio_path)
            out["AudioFrames"] = mfcc(signal)
    return out


def extract_features(
    manifest: DatasetManifest,
    cache_path: str | None = None,
    channels=("GOFF", "VIF", "LogC", "Cuboid", "Audio"),
    progress=None,
) -> FeatureTable:
    """Compute (or load) raw per-segment features.

    Each segment's features live in their own cache channels, so a cache
    written by an earlier partial run is extended instead of recomputed.
    Per-segment failures are collected and raised together at the end;
    everything that did succeed is still written to the cache.
    """
    table = FeatureTable()
    if cache_path is not None and os.path.exists(cache_path):
        table = read_feature_table(cache_path)
    stored = {"Audio": "AudioFrames"}
    bases = [stored.get(c, c) for c in channels]
    failures: list[str] = []
    changed = False
    for segment in manifest.segments:
        missing = [b for b in bases if not table.has_rows(b, segment.segment_id)]
        if not missing:
            continue
        wanted = [c for c in channels if stored.get(c, c) in missing]
        try:
            computed = _extract_segment(segment, wanted)
        except (OSError, FrameError, ValueError) as exc:
            failures.append(f"{segment.segment_id}: {exc}")
            continue
        for base, matrix in computed.items():
            table.set_rows(base, segment.segment_id, matrix)
        changed = True
        if progress is not None:
            progress(segment.segment_id)
    if cache_path is not None and changed:
        os.makedirs(os.path.dirname(os.path.abspath(cache_path)), exist_ok=True)
        write_feature_table(table, cache_path)
    if failures:
        raise ExtractionError(
            "feature extraction failed for "
            + str(len(failures)) + " segment(s): " + "; ".join(failures)
        )
    return table


# ---------------------------------------------------------------------------
# per-trial encoding

@dataclass
class TrialFeatures:
    """Per-channel (train, test) matrices plus which ones are histograms."""

    train: dict[str, np.ndarray]
    test: dict[str, np.ndarray]
    histogram_channels: tuple[str, ...]

    def ordered_channels(self) -> list[str]:
        return list(self.train.keys())


def _rows(table: FeatureTable, base: str, seg_id: str, audit: AuditLog) -> np.ndarray:
    audit.record(seg_id)
    return table.get_rows(base, seg_id)


def _stack_vectors(table, base, ids, audit) -> np.ndarray:
    return np.vstack([_rows(table, base, sid, audit) for sid in ids])


def encode_trial(
    table: FeatureTable,
    config: ExperimentConfig,
    train_ids: list[str],
    test_ids: list[str],
    trial: int,
    audit: AuditLog,
) -> TrialFeatures:
    train: dict[str, np.ndarray] = {}
    test: dict[str, np.ndarray] = {}
    hist: list[str] = []
    audit.set_phase("fit")

    for ch in config.channels:
        if ch in ("GOFF", "VIF"):
            X_tr = _stack_vectors(table, ch, train_ids, audit)
            model = standardize_fit(X_tr)
            train[ch] = standardize_apply(X_tr, model)
            audit.set_phase("eval")
            X_te = _stack_vectors(table, ch, test_ids, audit)
            test[ch] = standardize_apply(X_te, model)
            audit.set_phase("fit")
        elif ch == "LogC":
            windows = [_rows(table, "LogC", sid, audit) for sid in train_ids]
            all_tr = np.vstack(windows)
            k = min(config.codebook_k, all_tr.shape[0])
            enc = CodebookEncoder(k=k, seed=_seed_int(config.seed, trial, "logc-codebook"))
            enc.fit(all_tr)
            train[ch] = np.vstack([enc.transform(w) for w in windows])
            audit.set_phase("eval")
            test[ch] = np.vstack(
                [enc.transform(_rows(table, "LogC", sid, audit)) for sid in test_ids]
            )
            audit.set_phase("fit")
            hist.append(ch)
        elif ch == "Cuboid":
            descs = [_rows(table, "Cuboid", sid, audit) for sid in train_ids]
            all_tr = np.vstack([d for d in descs if d.shape[0] > 0])
            if all_tr.shape[0] == 0:
                raise PipelineError("no cuboid descriptors in any training segment")
            rng = np.random.default_rng(_seed_for(config.seed, trial, "cuboid-pca"))
            sample = all_tr
            if sample.shape[0] > 1000:
                pick = rng.choice(sample.shape[0], size=1000, replace=False)
                sample = sample[pick]
            reducer = PcaReducer(retained=config.pca_dims).fit(sample)
            projected = reducer.transform(all_tr)
            k = min(config.codebook_k, projected.shape[0])
            enc = CodebookEncoder(k=k, seed=_seed_int(config.seed, trial, "cuboid-codebook"))
            enc.fit(projected)

            def encode_segment(d):
                if d.shape[0] == 0:
                    return enc.transform(np.zeros((0, reducer.model_.r)))
                return enc.transform(reducer.transform(d))

            train[ch] = np.vstack([encode_segment(d) for d in descs])
            audit.set_phase("eval")
            test[ch] = np.vstack(
                [encode_segment(_rows(table, "Cuboid", sid, audit)) for sid in test_ids]
            )
            audit.set_phase("fit")
            hist.append(ch)
        elif ch == "Audio":
            frame_sets = [_rows(table, "AudioFrames", sid, audit) for sid in train_ids]
            stacked = [f for f in frame_sets if f.shape[0] > 0]
            if not stacked:
                continue  # modality absent everywhere: drop the channel
            ubm = train_ubm(
                np.vstack(stacked),
                n_components=config.ubm_components,
                seed=_seed_int(config.seed, trial, "ubm"),
            )

            def seg_vector(frames):
                if frames.shape[0] == 0:
                    return np.zeros(ubm.means.size)
                return supervector(map_adapt(ubm, frames))

            X_tr = np.vstack([seg_vector(f) for f in frame_sets])
            model = standardize_fit(X_tr)
            train[ch] = standardize_apply(X_tr, model)
            audit.set_phase("eval")
            X_te = np.vstack(
                [seg_vector(_rows(table, "AudioFrames", sid, audit)) for sid in test_ids]
            )
            test[ch] = standardize_apply(X_te, model)
            audit.set_phase("fit")
    return TrialFeatures(train=train, test=test, histogram_channels=tuple(hist))


# ---------------------------------------------------------------------------
# kernel bank

def build_kernel_bank(feats: TrialFeatures) -> list[KernelSpec]:
    """Per channel: linear, cubic polynomial, and RBF; per histogram
    channel a histogram-intersection kernel, plus one joint histogram
    kernel when several histogram channels are present."""
    bank: list[KernelSpec] = []
    for ch in feats.ordered_channels():
        bank.append(KernelSpec("linear", channels=(ch,)))
        bank.append(KernelSpec("polynomial", channels=(ch,)))
        bank.append(KernelSpec("rbf", gamma=rbf_gamma(feats.train[ch]), channels=(ch,)))
    for ch in feats.histogram_channels:
        bank.append(KernelSpec("dc_int", channels=(ch,)))
    if len(feats.histogram_channels) >= 2:
        bank.append(KernelSpec("dc_int", channels=tuple(feats.histogram_channels)))
    return bank


def _samples_for(spec: KernelSpec, feats: dict[str, np.ndarray]):
    if spec.kind == "dc_int":
        return {c: feats[c] for c in spec.channels}
    return feats[spec.channels[0]]


def build_gram_stacks(
    bank: list[KernelSpec], feats: TrialFeatures
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (M, n, n) training Grams and (M, n_test, n) test blocks."""
    train_list, test_list = [], []
    for spec in bank:
        A = _samples_for(spec, feats.train)
        B = _samples_for(spec, feats.test)
        K = cross_gram(spec, A, A)
        K = 0.5 * (K + K.T)
        diag_train = np.diag(K).copy()
        train_list.append(normalize(K, zero_diag="one"))
        K_test = cross_gram(spec, B, A)
        diag_test = self_similarities(spec, B)
        test_list.append(
            normalize(K_test, diag_rows=diag_test, diag_cols=diag_train, zero_diag="one")
        )
    return np.stack(train_list), np.stack(test_list)


# ---------------------------------------------------------------------------
# classifiers

def _poly_gram_single(feats: TrialFeatures) -> tuple[np.ndarray, np.ndarray]:
    X_tr = np.hstack([feats.train[c] for c in feats.ordered_channels()])
    X_te = np.hstack([feats.test[c] for c in feats.ordered_channels()])
    spec = KernelSpec("polynomial", channels=("all",))
    K = cross_gram(spec, X_tr, X_tr)
    K = 0.5 * (K + K.T)
    diag = np.diag(K).copy()
    K_n = normalize(K, zero_diag="one")
    K_test = normalize(
        cross_gram(spec, X_te, X_tr),
        diag_rows=self_similarities(spec, X_te),
        diag_cols=diag,
        zero_diag="one",
    )
    return K_n, K_test


def _hist_gram_single(feats: TrialFeatures) -> tuple[np.ndarray, np.ndarray]:
    if not feats.histogram_channels:
        raise PipelineError("histogram-kernel baseline needs a histogram channel")
    spec = KernelSpec("dc_int", channels=feats.histogram_channels)
    A = _samples_for(spec, feats.train)
    B = _samples_for(spec, feats.test)
    K = cross_gram(spec, A, A)
    return 0.5 * (K + K.T), cross_gram(spec, B, A)


def _cv_folds(y: np.ndarray, n_folds: int, rng) -> list[np.ndarray]:
    """Stratified fold assignment over training indices."""
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        rng.shuffle(members)
        for i, idx in enumerate(members):
            folds[i % n_folds].append(int(idx))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def _select_C(fit_fn, eval_fn, y: np.ndarray, c_grid, rng) -> float:
    """Mean-accuracy cross-validation on the training split only."""
    if len(c_grid) == 1:
        return c_grid[0]
    n_folds = min(3, int(np.min(np.bincount(y.astype(np.int64)))))
    n_folds = max(2, n_folds)
    folds = _cv_folds(y, n_folds, rng)
    best = (None, -1.0)
    for C in c_grid:
        scores = []
        for f in folds:
            held = f
            kept = np.setdiff1d(np.arange(len(y)), held)
            if np.unique(y[kept]).size < 2 or held.size == 0:
                continue
            model = fit_fn(C, kept)
            pred = eval_fn(model, held, kept)
            scores.append(float(np.mean(pred == y[held])))
        mean = float(np.mean(scores)) if scores else -1.0
        if mean > best[1]:
            best = (C, mean)
    return best[0] if best[0] is not None else c_grid[0]


@dataclass
class TrialResult:
    trial: int
    classifier: str
    report: MetricsReport | None
    cm: np.ndarray | None
    selections: list[list[int]] | None = None
    error: str | None = None


@dataclass
class RunOutcome:
    results: list[TrialResult] = field(default_factory=list)
    bank_specs: list[KernelSpec] | None = None
    n_trials: int = 0
    failed_trials: list[tuple[int, str]] = field(default_factory=list)
    audit_violations: list[tuple[int, list[str]]] = field(default_factory=list)

    def for_classifier(self, name: str) -> list[TrialResult]:
        return [r for r in self.results if r.classifier == name and r.error is None]

    def aggregate(self, name: str) -> dict[str, float]:
        rows = [r.report.as_row() for r in self.for_classifier(name)]
        if not rows:
            raise PipelineError(f"no successful trials for {name}")
        return {k: float(np.mean([row[k] for row in rows])) for k in rows[0]}

    def total_confusion(self, name: str) -> np.ndarray:
        mats = [r.cm for r in self.for_classifier(name)]
        return np.sum(mats, axis=0)

    def selections_for(self, name: str) -> list[list[int]]:
        out: list[list[int]] = []
        for r in self.for_classifier(name):
            if r.selections:
                out.extend(r.selections)
        return out


def _fit_eval_one(
    name: str,
    config: ExperimentConfig,
    feats: TrialFeatures,
    bank: list[KernelSpec],
    G_train: np.ndarray,
    G_test: np.ndarray,
    y_train: np.ndarray,
    y_test: np.ndarray,
    n_classes: int,
    trial: int,
    audit: AuditLog,
) -> TrialResult:
    cv_rng = np.random.default_rng(_seed_for(config.seed, trial, f"cv-{name}"))
    selections = None
    audit.set_phase("fit")
    if name == "svm_poly":
        K, K_test = _poly_gram_single(feats)
        C = _select_C(
            lambda C, kept: KernelSVC(C=C).fit(K[np.ix_(kept, kept)], y_train[kept]),
            lambda m, held, kept: m.predict(K[np.ix_(held, kept)]),
            y_train, config.c_grid, cv_rng,
        )
        clf = KernelSVC(C=C).fit(K, y_train)
        audit.set_phase("eval")
        pred = clf.predict(K_test)
    elif name == "svm_hist":
        K, K_test = _hist_gram_single(feats)
        C = _select_C(
            lambda C, kept: KernelSVC(C=C).fit(K[np.ix_(kept, kept)], y_train[kept]),
            lambda m, held, kept: m.predict(K[np.ix_(held, kept)]),
            y_train, config.c_grid, cv_rng,
        )
        clf = KernelSVC(C=C).fit(K, y_train)
        audit.set_phase("eval")
        pred = clf.predict(K_test)
    elif name == "simple_mkl":
        C = _select_C(
            lambda C, kept: SimpleMKLClassifier(C=C).fit(
                G_train[:, kept][:, :, kept], y_train[kept]
            ),
            lambda m, held, kept: m.predict(G_train[:, held][:, :, kept]),
            y_train, config.c_grid, cv_rng,
        )
        clf = SimpleMKLClassifier(C=C).fit(G_train, y_train)
        audit.set_phase("eval")
        pred = clf.predict(G_test)
        selections = [m.selected.tolist() for m in clf.models_]
    elif name == "mkboost":
        seed = _seed_int(config.seed, trial, "mkboost")
        C = _select_C(
            lambda C, kept: MKBoostClassifier(
                T=config.boost_rounds, C=C, seed=seed
            ).fit(G_train[:, kept][:, :, kept], y_train[kept]),
            lambda m, held, kept: m.predict(G_train[:, held][:, :, kept]),
            y_train, config.c_grid, cv_rng,
        )
        clf = MKBoostClassifier(T=config.boost_rounds, C=C, seed=seed).fit(
            G_train, y_train
        )
        audit.set_phase("eval")
        pred = clf.predict(G_test)
        selections = clf.kernel_selections()
    else:
        raise PipelineError(f"unknown classifier {name!r}")
    report = compute_report(y_test, pred, n_classes)
    cm = confusion(y_test, pred, n_classes)
    return TrialResult(trial=trial, classifier=name, report=report, cm=cm,
                       selections=selections)


def run_single_trial(
    trial: int,
    config: ExperimentConfig,
    table: FeatureTable,
    manifest: DatasetManifest,
    classifiers: list[str],
) -> tuple[list[TrialResult], list[str], list[KernelSpec]]:
    labels = manifest.labels
    ids = [s.segment_id for s in manifest.segments]
    rng = np.random.default_rng(_seed_for(config.seed, trial, "split"))
    train_idx, test_idx = stratified_split(labels, config.train_fraction, rng)
    train_ids = [ids[i] for i in train_idx]
    test_ids = [ids[i] for i in test_idx]
    y_train = labels[train_idx]
    y_test = labels[test_idx]

    audit = AuditLog()
    feats = encode_trial(table, config, train_ids, test_ids, trial, audit)
    audit.set_phase("fit")
    bank = build_kernel_bank(feats)
    G_train, G_test = build_gram_stacks(bank, feats)
    results = [
        _fit_eval_one(
            name, config, feats, bank, G_train, G_test,
            y_train, y_test, manifest.n_classes, trial, audit,
        )
        for name in classifiers
    ]
    return results, audit.violations(test_ids), bank


def run_trials(
    config: ExperimentConfig,
    table: FeatureTable | None = None,
    manifest: DatasetManifest | None = None,
    classifiers: list[str] | None = None,
    progress=None,
) -> RunOutcome:
    from .manifest import load_manifest

    if manifest is None:
        manifest = load_manifest(config.manifest)
    if table is None:
        table = extract_features(manifest, config.cache_path, config.channels)
    if classifiers is None:
        classifiers = [config.classifier]

    outcome = RunOutcome(n_trials=config.trials)
    max_failures = int(0.1 * config.trials)
    workers = max(1, int(os.environ.get("EGOFUSE_WORKERS", "1")))

    def one(trial: int):
        try:
            return trial, run_single_trial(trial, config, table, manifest, classifiers), None
        except Exception as exc:  # noqa: BLE001 - failed trials are data, not crashes
            return trial, None, f"{type(exc).__name__}: {exc}"

    if workers == 1:
        raw = [one(t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(one, range(config.trials)))

    for trial, payload, error in raw:
        if error is not None:
            outcome.failed_trials.append((trial, error))
            continue
        results, violations, bank = payload
        outcome.results.extend(results)
        if violations:
            outcome.audit_violations.append((trial, violations))
        if outcome.bank_specs is None:
            outcome.bank_specs = bank
        if progress is not None:
            progress(trial)

    if len(outcome.failed_trials) > max_failures:
        details = "; ".join(f"trial {t}: {msg}" for t, msg in outcome.failed_trials)
        raise TrialsFailedError(
            f"{len(outcome.failed_trials)} of {config.trials} trials failed: {details}",
            outcome,
        )
    return outcome
