"""Hierarchical quadrilateral mesh on the unit square with a crack slit.

The slit runs along y = 0.5 from the tip (0.5, 0.5) to the right edge
(1.0, 0.5) and is realized topologically: vertices on the open segment
are duplicated into an upper and a lower copy, so the two crack flanks
share no DOF-bearing entity except the tip vertex.  Cells are axis
aligned and refined dyadically; 1-irregularity (level difference <= 1
across any interior face) is enforced by closure during refinement.

All coordinates are dyadic rationals i / (n0 * 2^level) and vertex
identity is decided with exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Per-cell refinement decisions.
KEEP = "keep"
REFINE_H = "refine_h"
RAISE_P = "raise_p"

# Face order within a cell; FACE_AXIS[f] is the coordinate along the face.
FACES = ("bottom", "right", "top", "left")

# Vertex side markers for the duplicated slit entities.
SIDE_NONE = 0
SIDE_UPPER = 1
SIDE_LOWER = -1


@dataclass
class RefinementFlags:
    """Per-cell refinement decision, keyed by leaf cell id."""

    flags: dict[int, str] = field(default_factory=dict)

    def refine_set(self) -> list[int]:
        return [c for c, f in self.flags.items() if f == REFINE_H]

    def raise_set(self) -> list[int]:
        return [c for c, f in self.flags.items() if f == RAISE_P]


@dataclass
class FaceInfo:
    """Adjacency record for one face of a leaf cell.

    kind is one of 'boundary', 'equal', 'coarser', 'finer'; cells holds
    the neighboring leaf id(s) (two for 'finer', ordered along the face),
    tag the boundary tag for 'boundary' faces.
    """

    face: str
    kind: str
    cells: tuple[int, ...] = ()
    tag: str | None = None


class _Cell:
    __slots__ = ("level", "i", "j", "verts", "parent", "children")

    def __init__(self, level, i, j, verts, parent=None):
        self.level = level
        self.i = i
        self.j = j
        self.verts = verts  # (sw, se, nw, ne) vertex ids
        self.parent = parent
        self.children = None

    @property
    def is_leaf(self):
        return self.children is None


def _reduce(a: int, b: int) -> tuple[int, int]:
    """Canonical form of the dyadic index a / (n0 * 2^b)."""
    while b > 0 and a % 2 == 0:
        a //= 2
        b -= 1
    return a, b


class SlitQuadMesh:
    """Quadtree mesh over [0,1]^2 with the topological crack slit."""

    def __init__(self, n0: int, generation: int = 0, parent: "SlitQuadMesh | None" = None):
        if n0 < 2 or n0 % 2 != 0:
            raise ValueError(
                f"n0 must be even and >= 2 so the slit aligns with mesh lines, got {n0}"
            )
        self.n0 = n0
        self.generation = generation
        self.parent_mesh = parent
        self.verts: list[tuple[float, float, int]] = []
        self._vkey_to_id: dict[tuple, int] = {}
        self.cells: list[_Cell] = []
        self._key_to_cell: dict[tuple[int, int, int], int] = {}
        self._leaf_ids: list[int] | None = None

    # -- vertex bookkeeping -------------------------------------------------

    def _on_open_slit(self, xa, xb, ya, yb) -> bool:
        """Exact test for y == 1/2 and 1/2 < x <= 1."""
        den_y = self.n0 * (1 << yb)
        if 2 * ya != den_y:
            return False
        den_x = self.n0 * (1 << xb)
        return 2 * xa > den_x and xa <= den_x

    def _vertex(self, level, gi, gj, cell_above: bool) -> int:
        """Get-or-create the vertex at grid position (gi, gj) of `level`.

        cell_above says whether the requesting cell lies above the slit
        line; it decides which duplicate to use for on-slit vertices.
        """
        xa, xb = _reduce(gi, level)
        ya, yb = _reduce(gj, level)
        if self._on_open_slit(xa, xb, ya, yb):
            side = SIDE_UPPER if cell_above else SIDE_LOWER
        else:
            side = SIDE_NONE
        key = (xa, xb, ya, yb, side)
        vid = self._vkey_to_id.get(key)
        if vid is None:
            vid = len(self.verts)
            x = xa / (self.n0 * (1 << xb))
            y = ya / (self.n0 * (1 << yb))
            self.verts.append((x, y, side))
            self._vkey_to_id[key] = vid
        return vid

    def _make_cell(self, level, i, j, parent=None) -> int:
        # A cell's corner at y = 1/2 sits on its bottom edge iff the cell
        # lies above the slit line.
        above_bottom = 2 * j == self.n0 * (1 << level)
        below_top = 2 * (j + 1) == self.n0 * (1 << level)
        sw = self._vertex(level, i, j, cell_above=above_bottom)
        se = self._vertex(level, i + 1, j, cell_above=above_bottom)
        nw = self._vertex(level, i, j + 1, cell_above=not below_top)
        ne = self._vertex(level, i + 1, j + 1, cell_above=not below_top)
        cid = len(self.cells)
        self.cells.append(_Cell(level, i, j, (sw, se, nw, ne), parent))
        self._key_to_cell[(level, i, j)] = cid
        self._leaf_ids = None
        return cid

    # -- geometry queries ---------------------------------------------------

    def leaf_ids(self) -> list[int]:
        if self._leaf_ids is None:
            self._leaf_ids = [c for c, cell in enumerate(self.cells) if cell.is_leaf]
        return self._leaf_ids

    def cell_box(self, cid: int) -> tuple[float, float, float, float]:
        """(x0, y0, hx, hy) of the axis-aligned cell."""
        cell = self.cells[cid]
        h = 1.0 / (self.n0 * (1 << cell.level))
        return cell.i * h, cell.j * h, h, h

    def cell_diameter(self, cid: int) -> float:
        _, _, hx, hy = self.cell_box(cid)
        return (hx * hx + hy * hy) ** 0.5

    @property
    def tip_vertex(self) -> int:
        key = _reduce(self.n0 // 2, 0) + _reduce(self.n0 // 2, 0) + (SIDE_NONE,)
        return self._vkey_to_id[key]

    def tip_adjacent_leaves(self) -> list[int]:
        tip = self.tip_vertex
        return [c for c in self.leaf_ids() if tip in self.cells[c].verts]

    def ancestry(self, cid: int) -> list[int]:
        """Chain of parent ids from `cid` back to its level-0 root."""
        chain = []
        cur = self.cells[cid].parent
        while cur is not None:
            chain.append(cur)
            cur = self.cells[cur].parent
        return chain

    # -- adjacency ----------------------------------------------------------

    def _boundary_tag(self, cid: int, face: str) -> str | None:
        cell = self.cells[cid]
        den = self.n0 * (1 << cell.level)
        if face == "bottom" and cell.j == 0:
            return "bottom"
        if face == "top" and cell.j + 1 == den:
            return "top"
        if face == "left" and cell.i == 0:
            return "left"
        if face == "right" and cell.i + 1 == den:
            return "right"
        # Slit test: horizontal face on y = 1/2 with x-interval in [1/2, 1].
        if face in ("bottom", "top"):
            gj = cell.j if face == "bottom" else cell.j + 1
            if 2 * gj == den and 2 * cell.i >= den:
                return "crack_upper" if face == "bottom" else "crack_lower"
        return None

    def face_neighbors(self, cid: int) -> list[FaceInfo]:
        """Adjacency of all four faces of a leaf cell."""
        cell = self.cells[cid]
        if not cell.is_leaf:
            raise ValueError(f"cell {cid} is not a leaf")
        out = []
        for face in FACES:
            tag = self._boundary_tag(cid, face)
            if tag is not None:
                out.append(FaceInfo(face, "boundary", tag=tag))
                continue
            di, dj = {"bottom": (0, -1), "top": (0, 1), "left": (-1, 0), "right": (1, 0)}[face]
            ni, nj = cell.i + di, cell.j + dj
            same = self._key_to_cell.get((cell.level, ni, nj))
            if same is not None:
                nb = self.cells[same]
                if nb.is_leaf:
                    out.append(FaceInfo(face, "equal", cells=(same,)))
                    continue
                kids = self._face_children(same, _OPPOSITE[face])
                out.append(FaceInfo(face, "finer", cells=kids))
                continue
            parent = self._key_to_cell.get((cell.level - 1, ni // 2, nj // 2))
            if parent is None or not self.cells[parent].is_leaf:
                raise RuntimeError(
                    f"mesh is not 1-irregular at cell {cid} face {face}"
                )
            out.append(FaceInfo(face, "coarser", cells=(parent,)))
        return out

    def _face_children(self, cid: int, face: str) -> tuple[int, int]:
        """The two children of `cid` adjacent to `face`, ordered along it."""
        cell = self.cells[cid]
        sw, se, nw, ne = cell.children
        pick = {"bottom": (sw, se), "top": (nw, ne), "left": (sw, nw), "right": (se, ne)}
        kids = pick[face]
        for k in kids:
            if not self.cells[k].is_leaf:
                raise RuntimeError(f"mesh is not 1-irregular at cell {cid} face {face}")
        return kids

    def face_endpoints(self, cid: int, face: str) -> tuple[int, int]:
        """Endpoint vertex ids of a face, ordered by ascending coordinate."""
        sw, se, nw, ne = self.cells[cid].verts
        return {
            "bottom": (sw, se),
            "top": (nw, ne),
            "left": (sw, nw),
            "right": (se, ne),
        }[face]

    def slit_faces(self) -> list[tuple[int, str, str]]:
        """All (leaf, face, tag) records lying on the crack."""
        out = []
        for cid in self.leaf_ids():
            for face in ("bottom", "top"):
                tag = self._boundary_tag(cid, face)
                if tag in ("crack_upper", "crack_lower"):
                    out.append((cid, face, tag))
        return out

    def total_area(self) -> float:
        acc = 0.0
        for cid in self.leaf_ids():
            _, _, hx, hy = self.cell_box(cid)
            acc += hx * hy
        return acc

    # -- debug dump ---------------------------------------------------------

    def dump(self) -> str:
        """Plain-text snapshot (vertices, cells, leaf face tags)."""
        lines = [f"slitquadmesh n0={self.n0} generation={self.generation}"]
        lines.append(f"vertices {len(self.verts)}")
        for vid, (x, y, side) in enumerate(self.verts):
            lines.append(f"v {vid} {x:.12g} {y:.12g} side={side}")
        lines.append(f"cells {len(self.cells)}")
        for cid, cell in enumerate(self.cells):
            verts = ",".join(str(v) for v in cell.verts)
            parent = -1 if cell.parent is None else cell.parent
            lines.append(
                f"c {cid} level={cell.level} i={cell.i} j={cell.j} "
                f"verts={verts} leaf={int(cell.is_leaf)} parent={parent}"
            )
        for cid in self.leaf_ids():
            tags = []
            for face in FACES:
                tag = self._boundary_tag(cid, face)
                if tag is not None:
                    tags.append(f"{face}:{tag}")
            if tags:
                lines.append(f"b {cid} " + " ".join(tags))
        return "\n".join(lines) + "\n"


_OPPOSITE = {"bottom": "top", "top": "bottom", "left": "right", "right": "left"}


def build_initial_mesh(n0: int) -> SlitQuadMesh:
    """Uniform n0 x n0 grid with the slit vertices duplicated.

    n0 must be even so both the crack line y = 0.5 and the tip abscissa
    x = 0.5 coincide with mesh lines.
    """
    mesh = SlitQuadMesh(n0)
    for j in range(n0):
        for i in range(n0):
            mesh._make_cell(0, i, j)
    return mesh


def _closure(mesh: SlitQuadMesh, seed: set[int]) -> list[int]:
    """Extend the refinement set until 1-irregularity is preserved."""
    refine = set(seed)
    changed = True
    while changed:
        changed = False
        for cid in sorted(refine):
            for info in mesh.face_neighbors(cid):
                if info.kind == "coarser" and info.cells[0] not in refine:
                    refine.add(info.cells[0])
                    changed = True
    return sorted(refine)


def refine(mesh: SlitQuadMesh, flags: RefinementFlags) -> SlitQuadMesh:
    """New mesh generation with every refine_h cell split into 4 children.

    Additional cells are refined as needed (closure) so the result stays
    1-irregular.  The input mesh is not modified.
    """
    leaf_set = set(mesh.leaf_ids())
    for cid in flags.flags:
        if cid not in leaf_set:
            raise ValueError(f"flag references non-leaf cell {cid}")
    new = SlitQuadMesh(mesh.n0, generation=mesh.generation + 1, parent=mesh)
    new.verts = list(mesh.verts)
    new._vkey_to_id = dict(mesh._vkey_to_id)
    for cell in mesh.cells:
        clone = _Cell(cell.level, cell.i, cell.j, cell.verts, cell.parent)
        clone.children = cell.children
        new.cells.append(clone)
    new._key_to_cell = dict(mesh._key_to_cell)
    new._leaf_ids = None

    for cid in _closure(mesh, set(flags.refine_set())):
        cell = new.cells[cid]
        lv, i2, j2 = cell.level + 1, 2 * cell.i, 2 * cell.j
        kids = (
            new._make_cell(lv, i2, j2, parent=cid),
            new._make_cell(lv, i2 + 1, j2, parent=cid),
            new._make_cell(lv, i2, j2 + 1, parent=cid),
            new._make_cell(lv, i2 + 1, j2 + 1, parent=cid),
        )
        cell.children = kids
    return new
