"""Trained-model persistence inside the feature-cache container.

A fitted multi-kernel classifier is a kernel-bank descriptor plus, per
class, the simplex weights and the dual solution (alpha, labels, bias).
A boosted ensemble additionally stores its per-round sample indices and
weak solutions. Everything is stored as named float64 channels, so the
same binary container serves features and models.
"""

from __future__ import annotations

import math

import numpy as np

from .cache import FeatureTable
from .kernels import KernelSpec
from .mkboost import BoostEnsemble, BoostRound, MKBoostClassifier
from .mkl import MklModel, SimpleMKLClassifier
from .svm import DualSolution


class ModelFormatError(ValueError):
    pass


def _spec_to_id(spec: KernelSpec) -> str:
    gamma = "none" if spec.gamma is None else repr(float(spec.gamma))
    return "|".join(
        [spec.kind, str(spec.p), repr(float(spec.l)), gamma, "+".join(spec.channels)]
    )


def _spec_from_id(text: str) -> KernelSpec:
    parts = text.split("|")
    if len(parts) != 5:
        raise ModelFormatError(f"bad kernel descriptor {text!r}")
    kind, p, l, gamma, channels = parts
    return KernelSpec(
        kind=kind,
        p=int(p),
        l=float(l),
        gamma=None if gamma == "none" else float(gamma),
        channels=tuple(c for c in channels.split("+") if c),
    )


def _put(table: FeatureTable, name: str, array) -> None:
    mat = np.atleast_2d(np.asarray(array, dtype=np.float64))
    table.set_channel(name, ["%06d" % i for i in range(mat.shape[0])], mat)


def _get(table: FeatureTable, name: str) -> np.ndarray:
    if not table.has_channel(name):
        raise ModelFormatError(f"missing model channel {name!r}")
    return table.get_channel(name)[1]


def save_bank(table: FeatureTable, prefix: str, bank: list[KernelSpec]) -> None:
    ids = [_spec_to_id(s) for s in bank]
    table.set_channel(f"{prefix}:bank", ids, np.zeros((len(bank), 1)))


def load_bank(table: FeatureTable, prefix: str) -> list[KernelSpec]:
    if not table.has_channel(f"{prefix}:bank"):
        raise ModelFormatError(f"missing model channel '{prefix}:bank'")
    ids, _ = table.get_channel(f"{prefix}:bank")
    return [_spec_from_id(i) for i in ids]


def save_mkl_model(
    table: FeatureTable, clf: SimpleMKLClassifier, bank: list[KernelSpec],
    prefix: str = "model:mkl",
) -> None:
    save_bank(table, prefix, bank)
    _put(table, f"{prefix}:classes", np.asarray(clf.classes_, dtype=np.float64))
    for i, model in enumerate(clf.models_):
        _put(table, f"{prefix}:weights:{i}", model.weights)
        _put(table, f"{prefix}:alpha:{i}", model.inner.alpha)
        _put(table, f"{prefix}:y:{i}", model.inner.y)
        _put(table, f"{prefix}:bias_C:{i}", [model.inner.bias, model.inner.C])


def load_mkl_model(
    table: FeatureTable, prefix: str = "model:mkl"
) -> tuple[SimpleMKLClassifier, list[KernelSpec]]:
    bank = load_bank(table, prefix)
    classes = _get(table, f"{prefix}:classes").ravel()
    clf = SimpleMKLClassifier()
    clf.classes_ = classes
    clf.models_ = []
    for i in range(len(classes)):
        weights = _get(table, f"{prefix}:weights:{i}").ravel()
        alpha = _get(table, f"{prefix}:alpha:{i}").ravel()
        y = _get(table, f"{prefix}:y:{i}").ravel()
        bias, C = _get(table, f"{prefix}:bias_C:{i}").ravel()
        inner = DualSolution(
            alpha=alpha, bias=float(bias), y=y, C=float(C),
            objective=math.nan, n_iter=0, converged=True,
        )
        clf.models_.append(
            MklModel(weights=weights, inner=inner, objective_trace=[],
                     n_outer=0, converged=True)
        )
    return clf, bank


def save_boost_model(
    table: FeatureTable, clf: MKBoostClassifier, bank: list[KernelSpec],
    prefix: str = "model:boost",
) -> None:
    save_bank(table, prefix, bank)
    _put(table, f"{prefix}:classes", np.asarray(clf.classes_, dtype=np.float64))
    n_train = clf.ensembles_[0].n_train if clf.ensembles_ else 0
    _put(table, f"{prefix}:n_train", [float(n_train)])
    for i, ens in enumerate(clf.ensembles_):
        _put(table, f"{prefix}:kernels:{i}", [float(k) for k in ens.kernel_indices])
        _put(table, f"{prefix}:wts:{i}", [rd.weight for rd in ens.rounds])
        _put(table, f"{prefix}:errs:{i}", [rd.error for rd in ens.rounds])
        for t, rd in enumerate(ens.rounds):
            _put(table, f"{prefix}:sample:{i}:{t}",
                 np.asarray(rd.sample_indices, dtype=np.float64))
            _put(table, f"{prefix}:alpha:{i}:{t}", rd.solution.alpha)
            _put(table, f"{prefix}:y:{i}:{t}", rd.solution.y)
            _put(table, f"{prefix}:bias_C:{i}:{t}",
                 [rd.solution.bias, rd.solution.C])


def load_boost_model(
    table: FeatureTable, prefix: str = "model:boost"
) -> tuple[MKBoostClassifier, list[KernelSpec]]:
    bank = load_bank(table, prefix)
    classes = _get(table, f"{prefix}:classes").ravel()
    n_train = int(_get(table, f"{prefix}:n_train").ravel()[0])
    clf = MKBoostClassifier()
    clf.classes_ = classes
    clf.ensembles_ = []
    for i in range(len(classes)):
        kernels = _get(table, f"{prefix}:kernels:{i}").ravel()
        weights = _get(table, f"{prefix}:wts:{i}").ravel()
        errors = _get(table, f"{prefix}:errs:{i}").ravel()
        rounds = []
        for t in range(len(kernels)):
            sample = _get(table, f"{prefix}:sample:{i}:{t}").ravel().astype(np.int64)
            alpha = _get(table, f"{prefix}:alpha:{i}:{t}").ravel()
            y = _get(table, f"{prefix}:y:{i}:{t}").ravel()
            bias, C = _get(table, f"{prefix}:bias_C:{i}:{t}").ravel()
            sol = DualSolution(
                alpha=alpha, bias=float(bias), y=y, C=float(C),
                objective=math.nan, n_iter=0, converged=True,
            )
            rounds.append(
                BoostRound(kernel_index=int(kernels[t]), solution=sol,
                           sample_indices=sample, weight=float(weights[t]),
                           error=float(errors[t]))
            )
        clf.ensembles_.append(BoostEnsemble(rounds=rounds, n_train=n_train))
    return clf, bank
