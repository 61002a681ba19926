"""Bagging-style aggregation of edge models into one voting supermodel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataio import Dataset
from ..errors import DataError
from ..gbdt import GbdtModel, GbdtParams, fit, predict_proba

VOTE_RULE = "majority-mean-proba"

SERVER_DEVICE_ID = 0


@dataclass(eq=False)
class EnsembleModel:
    """Edge models plus one server-trained member, under majority vote.

    Ties go to the class with the highest mean predicted probability
    across members, then to the lowest class id.
    """

    members: tuple[GbdtModel, ...]
    member_origins: tuple[int, ...]
    vote_rule: str = VOTE_RULE

    def __post_init__(self):
        self.members = tuple(self.members)
        self.member_origins = tuple(self.member_origins)
        if not self.members:
            raise DataError("ensemble needs at least one member")
        if len(self.members) != len(self.member_origins):
            raise DataError("need exactly one origin per member")
        first = self.members[0]
        for m in self.members[1:]:
            if m.n_classes != first.n_classes or m.n_features != first.n_features:
                raise DataError("ensemble members must share n_classes and n_features")
        if self.vote_rule != VOTE_RULE:
            raise DataError(f"unknown vote rule {self.vote_rule!r}")

    @property
    def n_classes(self) -> int:
        return self.members[0].n_classes

    @property
    def n_features(self) -> int:
        return self.members[0].n_features

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnsembleModel):
            return NotImplemented
        return (
            self.members == other.members
            and self.member_origins == other.member_origins
            and self.vote_rule == other.vote_rule
        )


def build_ensemble(
    edge_models: Sequence[GbdtModel],
    server_train: Dataset,
    params: GbdtParams,
    edge_origins: Sequence[int] | None = None,
) -> EnsembleModel:
    """Train the server's own member and bundle it with the edge models.

    Edge origins default to device ids 1..N in list order; the server
    member is appended last with device id 0.
    """
    edge_models = list(edge_models)
    if not edge_models:
        raise DataError("need at least one edge model")
    if edge_origins is None:
        edge_origins = list(range(1, len(edge_models) + 1))
    else:
        edge_origins = list(edge_origins)
        if len(edge_origins) != len(edge_models):
            raise DataError("need one origin per edge model")
    server_member = fit(server_train, params)
    return EnsembleModel(
        members=tuple(edge_models) + (server_member,),
        member_origins=tuple(edge_origins) + (SERVER_DEVICE_ID,),
    )


def ensemble_predict(e: EnsembleModel, x) -> np.ndarray | int:
    """Majority vote; accepts one vector (D,) or a batch (N, D)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != e.n_features:
        raise DataError(f"expected {e.n_features} features, got shape {np.shape(x)}")
    k = e.n_classes
    n = len(arr)
    votes = np.zeros((n, k), dtype=np.int64)
    proba_sum = np.zeros((n, k), dtype=np.float64)
    for member in e.members:
        proba = predict_proba(member, arr)
        votes[np.arange(n), np.argmax(proba, axis=1)] += 1
        proba_sum += proba
    mean_proba = proba_sum / len(e.members)
    # vote count dominates; mean probability (< 2) breaks count ties; argmax
    # itself breaks residual ties toward the lowest class id
    ids = np.argmax(votes * 2.0 + mean_proba, axis=1)
    return int(ids[0]) if single else ids
