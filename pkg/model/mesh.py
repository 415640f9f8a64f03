from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

BOUNDARY = -1


@dataclass(frozen=True)
class ElementGeometry:
    """Affine data of one triangle: x = jacobian @ xi + offset on the reference triangle."""

    element_id: int
    area: float
    diameter: float
    edge_lengths: np.ndarray
    outward_normals: np.ndarray
    jacobian: np.ndarray
    offset: np.ndarray
    inverse_jacobian: np.ndarray
    determinant: float

    @property
    def h_T(self) -> float:
        return self.diameter

    def to_physical(self, reference_points: np.ndarray) -> np.ndarray:
        return np.asarray(reference_points) @ self.jacobian.T + self.offset

    def to_reference(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.offset) @ self.inverse_jacobian.T


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Mesh:
    """
    Conforming triangulation with face (edge) topology.

    Local edge i of a triangle joins its vertices i+1 and i+2 (mod 3). Faces are
    stored with the smaller vertex index first; element_face_signs records
    whether the element traverses its edge in that canonical direction (+1),
    which is also the sign of its outward normal relative to the canonical
    face normal.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray):
        self.vertices = _read_only(np.array(vertices, dtype=float).reshape(-1, 2))
        self.triangles = _read_only(np.array(triangles, dtype=np.int64).reshape(-1, 3))
        if len(self.triangles) == 0:
            raise ValueError("A mesh needs at least one triangle")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise ValueError("Triangle vertex index out of range")

        areas = self._signed_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise ValueError(f"Triangle {bad} is degenerate or clockwise (signed area {areas[bad]:.3e})")

        self._build_topology()

    def _signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def _build_topology(self):
        incidences: Dict[Tuple[int, int], List[Tuple[int, int, int]]] = {}
        for t, tri in enumerate(self.triangles):
            for i in range(3):
                a, b = int(tri[(i + 1) % 3]), int(tri[(i + 2) % 3])
                key = (min(a, b), max(a, b))
                sign = 1 if a < b else -1
                incidences.setdefault(key, []).append((t, i, sign))

        faces = sorted(incidences)
        n_faces = len(faces)
        face_elements = np.full((n_faces, 2), BOUNDARY, dtype=np.int64)
        face_local_edges = np.full((n_faces, 2), BOUNDARY, dtype=np.int64)
        element_faces = np.zeros((len(self.triangles), 3), dtype=np.int64)
        element_face_signs = np.zeros((len(self.triangles), 3), dtype=np.int64)

        for f, key in enumerate(faces):
            incident = incidences[key]
            if len(incident) > 2:
                raise ValueError(f"Face {key} is shared by {len(incident)} triangles")
            if len(incident) == 2 and incident[0][2] == incident[1][2]:
                raise ValueError(f"Face {key} is traversed in the same direction by both neighbours")
            # the element running along the canonical direction is the left one
            incident = sorted(incident, key=lambda item: -item[2])
            for side, (t, i, sign) in enumerate(incident):
                face_elements[f, side] = t
                face_local_edges[f, side] = i
                element_faces[t, i] = f
                element_face_signs[t, i] = sign

        self.faces = _read_only(np.array(faces, dtype=np.int64).reshape(-1, 2))
        self.face_elements = _read_only(face_elements)
        self.face_local_edges = _read_only(face_local_edges)
        self.element_faces = _read_only(element_faces)
        self.element_face_signs = _read_only(element_face_signs)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return _read_only(np.flatnonzero(self.face_elements[:, 1] == BOUNDARY))

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return _read_only(np.flatnonzero(self.face_elements[:, 1] != BOUNDARY))

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces[self.boundary_faces].ravel()] = True
        return _read_only(mask)

    @cached_property
    def vertex_patches(self) -> List[np.ndarray]:
        """omega_a: the elements having vertex a as a corner."""
        patches: List[List[int]] = [[] for _ in range(self.n_vertices)]
        for t, tri in enumerate(self.triangles):
            for a in tri:
                patches[int(a)].append(t)
        return [np.array(p, dtype=np.int64) for p in patches]

    @cached_property
    def jacobians(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return _read_only(np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1))

    @cached_property
    def offsets(self) -> np.ndarray:
        return _read_only(self.vertices[self.triangles[:, 0]].copy())

    @cached_property
    def determinants(self) -> np.ndarray:
        return _read_only(np.linalg.det(self.jacobians))

    @cached_property
    def areas(self) -> np.ndarray:
        return _read_only(0.5 * self.determinants)

    @cached_property
    def centroids(self) -> np.ndarray:
        return _read_only(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        """(n_elements, 3, 2): local edge i runs from vertex i+1 to vertex i+2."""
        p = self.vertices[self.triangles]
        return _read_only(np.stack([p[:, (i + 2) % 3] - p[:, (i + 1) % 3] for i in range(3)], axis=1))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return _read_only(np.linalg.norm(self.edge_vectors, axis=-1))

    @cached_property
    def diameters(self) -> np.ndarray:
        return _read_only(self.edge_lengths.max(axis=1))

    @cached_property
    def outward_normals(self) -> np.ndarray:
        tangents = self.edge_vectors / self.edge_lengths[..., None]
        # clockwise rotation of a counter-clockwise tangent points outwards
        return _read_only(np.stack([tangents[..., 1], -tangents[..., 0]], axis=-1))

    @cached_property
    def face_lengths(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return _read_only(np.linalg.norm(p[:, 1] - p[:, 0], axis=-1))

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def geometry(self, element_id: int) -> ElementGeometry:
        if not 0 <= element_id < self.n_elements:
            raise ValueError(f"Element id {element_id} is out of range 0..{self.n_elements - 1}")
        jacobian = self.jacobians[element_id]
        return ElementGeometry(
            element_id=element_id,
            area=float(self.areas[element_id]),
            diameter=float(self.diameters[element_id]),
            edge_lengths=self.edge_lengths[element_id],
            outward_normals=self.outward_normals[element_id],
            jacobian=jacobian,
            offset=self.offsets[element_id],
            inverse_jacobian=np.linalg.inv(jacobian),
            determinant=float(self.determinants[element_id]),
        )

    def face_points(self, face_id: int, t: np.ndarray) -> np.ndarray:
        """Points at canonical parameters t in [0, 1] along a face."""
        a, b = self.vertices[self.faces[face_id]]
        t = np.asarray(t, dtype=float)
        return a + t[..., None] * (b - a)
