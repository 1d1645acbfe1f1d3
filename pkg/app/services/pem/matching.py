from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.models.pem import Box, BoxMatchProblem


@dataclass(frozen=True)
class MatchResult:
    pairs: list[tuple[int, int]]
    total_cost: float


def iou(a: Box, b: Box) -> float:
    width = min(a.x2, b.x2) - max(a.x1, b.x1)
    height = min(a.y2, b.y2) - max(a.y1, b.y1)
    if width <= 0 or height <= 0:
        return 0.0
    intersection = width * height
    return intersection / (a.area + b.area - intersection)


def iou_cost_matrix(problem: BoxMatchProblem) -> np.ndarray:
    """1 - IoU for every (gt, pred) pair; disjoint boxes cost 1."""
    cost = np.ones((len(problem.gt), len(problem.pred)))
    for i, gt in enumerate(problem.gt):
        for j, pred in enumerate(problem.pred):
            cost[i, j] = 1.0 - iou(gt, pred)
    return cost


def assign(cost: np.ndarray) -> MatchResult:
    """Minimum-cost one-to-one assignment of size min(rows, cols)."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return MatchResult(pairs=[], total_cost=0.0)
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols, strict=True)]
    return MatchResult(pairs=pairs, total_cost=float(cost[rows, cols].sum()))


def hungarian_match(problem: BoxMatchProblem) -> MatchResult:
    return assign(iou_cost_matrix(problem))


def detected_ground_truth(problem: BoxMatchProblem, min_iou: float = 0.5) -> list[bool]:
    """Per ground-truth box: matched to a prediction with IoU >= min_iou.

    Unmatched ground truths count as missed detections.
    """
    detected = [False] * len(problem.gt)
    result = hungarian_match(problem)
    for gt_index, pred_index in result.pairs:
        if iou(problem.gt[gt_index], problem.pred[pred_index]) >= min_iou:
            detected[gt_index] = True
    return detected
