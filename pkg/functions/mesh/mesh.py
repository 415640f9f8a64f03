import logging
from pathlib import Path
from typing import List

import numpy as np

from model.mesh import BOUNDARY, ElementGeometry, Mesh
from model.pydantic_models import MeshPattern

GEOMETRY_TOLERANCE = 1e-14


def build_structured_mesh(n: int, pattern: MeshPattern = MeshPattern.DIAGONAL) -> Mesh:
    """
    n x n squares on the unit square.

    DIAGONAL splits every square by the diagonal from (i/n, j/n) to
    ((i+1)/n, (j+1)/n); CRISSCROSS splits it by both diagonals through an
    added centre vertex.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"Mesh resolution must be a positive integer, got {n}")

    ticks = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ticks, ticks)
    vertices = [np.column_stack([xx.ravel(), yy.ravel()])]

    def corner(i, j):
        return j * (n + 1) + i

    triangles = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)
            if pattern == MeshPattern.DIAGONAL:
                triangles.extend([(a, b, c), (a, c, d)])
            else:
                m = (n + 1) ** 2 + j * n + i
                triangles.extend([(a, b, m), (b, c, m), (c, d, m), (d, a, m)])

    if pattern == MeshPattern.CRISSCROSS:
        centres = (np.arange(n) + 0.5) / n
        cx, cy = np.meshgrid(centres, centres)
        vertices.append(np.column_stack([cx.ravel(), cy.ravel()]))

    mesh = Mesh(np.vstack(vertices), np.array(triangles))
    logging.debug(
        f"Built {pattern.value} mesh n={n}: {mesh.n_vertices} vertices, "
        f"{mesh.n_elements} triangles, {mesh.n_faces} faces"
    )
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle is split into 4 similar children at its edge midpoints."""
    midpoints = 0.5 * mesh.vertices[mesh.faces].sum(axis=1)
    vertices = np.vstack([mesh.vertices, midpoints])

    mid = mesh.n_vertices + mesh.element_faces
    triangles = np.empty((4 * mesh.n_elements, 3), dtype=np.int64)
    v0, v1, v2 = mesh.triangles.T
    m0, m1, m2 = mid.T
    triangles[0::4] = np.column_stack([v0, m2, m1])
    triangles[1::4] = np.column_stack([m2, v1, m0])
    triangles[2::4] = np.column_stack([m1, m0, v2])
    triangles[3::4] = np.column_stack([m0, m1, m2])

    refined = Mesh(vertices, triangles)
    logging.debug(f"Refined mesh: {mesh.n_elements} -> {refined.n_elements} triangles")
    return refined


def element_geometry(mesh: Mesh, element_id: int) -> ElementGeometry:
    return mesh.geometry(element_id)


def check_mesh(mesh: Mesh) -> List[str]:
    """Return a description of every violated mesh invariant (empty when valid)."""
    problems = []

    euler = mesh.n_vertices - mesh.n_faces + mesh.n_elements
    if euler != 1:
        problems.append(f"Euler characteristic is {euler}, expected 1")

    if np.any(mesh.areas <= 0.0):
        problems.append(f"{int(np.sum(mesh.areas <= 0.0))} triangles with non-positive area")

    counts = np.bincount(mesh.element_faces.ravel(), minlength=mesh.n_faces)
    interior = mesh.face_elements[:, 1] != BOUNDARY
    if np.any(counts[interior] != 2) or np.any(counts[~interior] != 1):
        problems.append("Face incidence counts do not match interior/boundary classification")

    # a boundary face off the square boundary means a hanging node or a hole
    p = mesh.vertices[mesh.faces[mesh.boundary_faces]]
    on_side = np.zeros(len(p), dtype=bool)
    for axis in range(2):
        for value in (0.0, 1.0):
            on_side |= np.all(np.abs(p[:, :, axis] - value) < GEOMETRY_TOLERANCE, axis=1)
    if not np.all(on_side):
        problems.append(f"{int(np.sum(~on_side))} boundary faces lie inside the domain")

    closure = np.einsum("te,ted->td", mesh.edge_lengths, mesh.outward_normals)
    if np.abs(closure).max() > GEOMETRY_TOLERANCE:
        problems.append(f"Sum of |F| n_F over an element is {np.abs(closure).max():.2e}, expected 0")

    faces = mesh.interior_faces
    left, right = mesh.face_elements[faces].T
    left_edge, right_edge = mesh.face_local_edges[faces].T
    jump = mesh.outward_normals[left, left_edge] + mesh.outward_normals[right, right_edge]
    if len(faces) and np.abs(jump).max() > GEOMETRY_TOLERANCE:
        problems.append(f"Interior normals disagree by {np.abs(jump).max():.2e}")

    return problems


def shape_regularity(mesh: Mesh) -> np.ndarray:
    """h_T^2 / |T| per element."""
    return mesh.diameters**2 / mesh.areas


def export_mesh(mesh: Mesh, path: str) -> None:
    out = Path(path)
    with open(out, "w", encoding="utf-8") as f:
        f.write(f"vertices {mesh.n_vertices} triangles {mesh.n_elements}\n")
        for x, y in mesh.vertices:
            f.write(f"{x!r} {y!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
    logging.info(f"Mesh written to {out}")
