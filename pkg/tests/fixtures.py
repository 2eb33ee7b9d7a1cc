"""Shared geometry fixtures: analytic shapes and random meshes."""

import numpy as np

from peelkit import PinholeCamera, TriangleMesh

_ICO_T = (1 + 5 ** 0.5) / 2
_ICO_VERTS = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=np.float64)
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def icosphere(subdiv=3, radius=1.0, center=(0.0, 0.0, 0.0), colors=False):
    """Subdivided icosahedron projected to a sphere (20 * 4**subdiv faces)."""
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(subdiv):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (verts[a] + verts[b]) / 2
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    col = None
    if colors:
        col = (np.array(verts) + 1.0) / 2.0
    return TriangleMesh(v, np.array(faces, dtype=np.int64), col)


def hemisphere(subdiv=3, radius=1.0, center=(0.0, 0.0, 0.0), axis_min=0.0):
    """Upper (y >= axis_min before scaling) half of an icosphere shell."""
    full = icosphere(subdiv, 1.0, (0.0, 0.0, 0.0))
    centroids = full.face_centroids()
    keep = centroids[:, 1] >= axis_min
    faces = full.faces[keep]
    used = np.unique(faces)
    remap = np.full(full.num_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    v = full.vertices[used] * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, remap[faces])


def cube(size=1.0, center=(0.0, 0.0, 0.0)):
    """Axis-aligned cube of 12 triangles."""
    h = size / 2.0
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    # index bits: x*4 + y*2 + z
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x- x+
        (0, 4, 5, 1), (2, 3, 7, 6),  # y- y+
        (0, 2, 6, 4), (1, 5, 7, 3),  # z- z+
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(corners + np.asarray(center, dtype=np.float64),
                        np.array(faces, dtype=np.int64))


def quad(z, half=10.0):
    """Two triangles spanning x, y in [-half, half] at constant depth z."""
    v = np.array([[-half, -half, z], [half, -half, z],
                  [half, half, z], [-half, half, z]])
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(v, f)


def triangle_soup(n_faces, seed, lo=-1.0, hi=1.0, tri_size=0.3, center=(0, 0, 0)):
    """Random disconnected triangles inside a box around `center`."""
    rng = np.random.default_rng(seed)
    anchors = rng.uniform(lo, hi, size=(n_faces, 1, 3))
    offsets = rng.uniform(-tri_size, tri_size, size=(n_faces, 3, 3))
    tris = anchors + offsets + np.asarray(center, dtype=np.float64)
    verts = tris.reshape(-1, 3)
    faces = np.arange(3 * n_faces, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(verts, faces)


def bumpy_sphere(subdiv, seed, radius=1.0, center=(0, 0, 0), bump=0.1):
    """Icosphere with seeded radial noise; stays watertight-topology."""
    rng = np.random.default_rng(seed)
    m = icosphere(subdiv, 1.0, (0.0, 0.0, 0.0))
    r = radius * (1.0 + rng.uniform(-bump, bump, size=m.num_vertices))
    v = m.vertices * r[:, None] + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, m.faces)


def simple_camera(res=64, focal=None):
    focal = focal if focal is not None else res
    return PinholeCamera(fx=focal, fy=focal, cx=res / 2, cy=res / 2,
                         width=res, height=res)


def random_rays(n, seed, origin_box=2.5, target_box=1.0):
    """Rays from a shell outside the unit region aimed into it."""
    rng = np.random.default_rng(seed)
    origins = rng.uniform(-origin_box, origin_box, size=(n, 3))
    origins += np.sign(origins) * origin_box  # push outside the geometry
    targets = rng.uniform(-target_box, target_box, size=(n, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs
