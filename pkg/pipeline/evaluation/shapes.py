"""
Structural checks on binary unit cells (solid = 1, void = 0, x periodic).

The top surface of a column is its first solid row. Depressions are runs of
columns whose surface lies deeper than the highest surface point.
"""
import numpy as np
import scipy.ndimage
import scipy.sparse
import scipy.sparse.csgraph


def surface_rows(img) -> np.ndarray:
    """First solid row of each column; columns without solid report the height."""
    solid = np.asarray(img) > 0.5
    return np.where(solid.any(axis=0), solid.argmax(axis=0), solid.shape[0])


def depression_runs(img, tolerance: int = 2) -> list[tuple[int, int]]:
    """(start column, length) of each depression, merged across the periodic edge."""
    rows = surface_rows(img)
    depressed = rows > rows.min() + tolerance
    width = depressed.size
    if depressed.all() or not depressed.any():
        return []

    start = int(np.flatnonzero(~depressed)[0])
    order = np.roll(np.arange(width), -start)
    runs = []
    run_start, length = None, 0
    for column in order:
        if depressed[column]:
            if run_start is None:
                run_start = int(column)
            length += 1
        elif run_start is not None:
            runs.append((run_start, length))
            run_start, length = None, 0
    if run_start is not None:
        runs.append((run_start, length))
    return runs


def count_depressions(img, tolerance: int = 2) -> int:
    return len(depression_runs(img, tolerance))


def periodic_labels(mask: np.ndarray, periodic_y: bool = False) -> tuple[np.ndarray, int]:
    """4-connected components of `mask`, with components joined across the x edges."""
    labels, count = scipy.ndimage.label(mask)
    if count == 0:
        return labels, 0

    pairs = [(labels[:, 0], labels[:, -1])]
    if periodic_y:
        pairs.append((labels[0, :], labels[-1, :]))
    rows, cols = [], []
    for left, right in pairs:
        joined = (left > 0) & (right > 0)
        rows.extend(left[joined])
        cols.extend(right[joined])

    graph = scipy.sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(count + 1, count + 1)
    )
    _, merged = scipy.sparse.csgraph.connected_components(graph, directed=False)
    # label 0 is background and keeps its own component
    relabel = np.unique(merged[1:], return_inverse=True)[1] + 1
    lookup = np.concatenate([[0], relabel])
    return lookup[labels], int(relabel.max())


def solid_components(img) -> int:
    return periodic_labels(np.asarray(img) > 0.5)[1]


def has_enclosed_void(img) -> bool:
    """True if some void region touches neither the top nor the bottom row."""
    void = np.asarray(img) <= 0.5
    labels, count = periodic_labels(void)
    if count == 0:
        return False
    open_labels = set(np.unique(labels[0])) | set(np.unique(labels[-1]))
    open_labels.discard(0)
    return any(label not in open_labels for label in range(1, count + 1))


def is_trench_like(img, min_depressions: int = 1, max_depressions: int = 3, tolerance: int = 2) -> bool:
    """
    A single solid slab whose columns are solid from their surface row to the
    bottom, carrying between min_depressions and max_depressions depressions.
    """
    solid = np.asarray(img) > 0.5
    if solid_components(solid) != 1 or has_enclosed_void(solid):
        return False

    height = solid.shape[0]
    rows = surface_rows(solid)
    for column, top in enumerate(rows):
        if top < height and not solid[top:, column].all():
            return False
    return min_depressions <= count_depressions(solid, tolerance) <= max_depressions
