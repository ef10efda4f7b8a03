"""
Uplink / downlink pilot assignment.

Pilots are mutually orthogonal unit vectors, so only their indices matter:
the inner product of two pilots is 1 when the indices agree and 0 otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasiblePilotAssignment


def gram(indices) -> np.ndarray:
    """K x K matrix with entry 1 where two UEs share a pilot index."""
    idx = np.asarray(indices, dtype=int)
    return (idx[:, None] == idx[None, :]).astype(float)


def assign_uplink_pilots(beta: np.ndarray, tau_up: int) -> np.ndarray:
    """
    Balanced greedy uplink pilot assignment.

    UEs are visited in decreasing order of their strongest coefficient
    ``max_m beta[m, k]``. The first `tau_up` UEs get distinct pilots. Each later
    UE takes, among pilots used fewer than ``ceil(K / tau_up)`` times, the one
    whose current users are weakest at the UE's strongest AP. Ties go to the
    lowest pilot index.
    """
    if tau_up < 1:
        raise DomainError("tau_up must be at least 1")
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[1]
    up = np.full(K, -1, dtype=int)
    if K == 0:
        return up
    cap = math.ceil(K / tau_up)
    load = np.zeros(tau_up, dtype=int)
    order = sorted(range(K), key=lambda k: (-beta[:, k].max(), k))
    for rank, k in enumerate(order):
        if rank < tau_up:
            p = rank
        else:
            m_star = int(np.argmax(beta[:, k]))
            cost = np.zeros(tau_up)
            np.add.at(cost, up[up >= 0], beta[m_star, up >= 0])
            cost[load >= cap] = np.inf
            p = int(np.argmin(cost))
        up[k] = p
        load[p] += 1
    return up


def assign_downlink_pilots(up_index, tau_dp: int) -> np.ndarray:
    """
    Downlink pilots that are distinct inside every uplink-pilot group.

    A single counter runs over the groups in increasing uplink-pilot order
    (members in UE order) and hands out ``counter mod tau_dp``.
    """
    up = np.asarray(up_index, dtype=int)
    dp = np.full(up.size, -1, dtype=int)
    if up.size == 0:
        return dp
    if tau_dp < 1:
        raise InfeasiblePilotAssignment("tau_dp must be at least 1 for downlink training")
    counter = 0
    for p in np.unique(up):
        members = np.flatnonzero(up == p)
        if members.size > tau_dp:
            raise InfeasiblePilotAssignment(
                f"uplink pilot {p} is shared by {members.size} UEs but tau_dp={tau_dp}")
        for k in members:
            dp[k] = counter % tau_dp
            counter += 1
    return dp


@dataclass(frozen=True)
class PilotBook:
    tau_up: int
    tau_dp: int
    up_index: np.ndarray
    dp_index: np.ndarray

    @property
    def up_gram(self) -> np.ndarray:
        return gram(self.up_index)

    @property
    def dp_gram(self) -> np.ndarray:
        """Downlink Gram matrix; the identity when tau_dp == 0 (no downlink pilots)."""
        if self.tau_dp == 0:
            return np.eye(self.up_index.size)
        return gram(self.dp_index)

    def cross_orthogonal(self) -> bool:
        if self.tau_dp == 0:
            return True
        clash = (self.up_gram == 1) & (self.dp_gram == 1)
        np.fill_diagonal(clash, False)
        return not clash.any()

    def to_dict(self) -> dict:
        return {"tau_up": self.tau_up, "tau_dp": self.tau_dp,
                "up_index": self.up_index.tolist(), "dp_index": self.dp_index.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PilotBook":
        return cls(int(d["tau_up"]), int(d["tau_dp"]),
                   np.asarray(d["up_index"], dtype=int), np.asarray(d["dp_index"], dtype=int))


def make_pilot_book(beta: np.ndarray, tau_up: int, tau_dp: int) -> PilotBook:
    """Cell-free pilot book; `tau_dp = 0` means no downlink pilots."""
    up = assign_uplink_pilots(beta, tau_up)
    dp = assign_downlink_pilots(up, tau_dp) if tau_dp > 0 else np.full(up.size, -1, dtype=int)
    return PilotBook(tau_up, tau_dp, up, dp)


def cellular_pilot_book(L_c: int, K_c: int, tau_up: int, tau_dp: int) -> PilotBook:
    """Reuse-one pilots: UE k of every cell uses uplink and downlink pilot k."""
    if tau_up < K_c or (tau_dp and tau_dp < K_c):
        raise InfeasiblePilotAssignment("cellular pilots need tau_up, tau_dp >= K_c")
    idx = np.tile(np.arange(K_c), L_c)
    return PilotBook(tau_up, tau_dp, idx.copy(), idx.copy() if tau_dp else np.full(idx.size, -1))
