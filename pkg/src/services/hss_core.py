"""HSS form accounting, consistency checks, dense expansion and HSSF0001 I/O."""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from src.core.constants import FORM_FILE_MAGIC, FORM_FILE_VERSION, INDEX_BYTES, REAL_BYTES
from src.core.errors import CorruptFormError, FormatError, InvalidArgumentError, OracleRefusedError
from src.models.hss import HssForm, HssNode, PermutedBasis
from src.models.source import MatrixSource
from src.models.tree import ClusterTree, TreeDocument, TreeNodeDocument
from src.services.cluster_tree import postorder, tree_from_document, validate_tree
from src.services.dense_kernels import id_compress


def check_form(h: HssForm) -> tuple[bool, str | None]:
    """Check generator dimensions against the tree. Returns (is_valid, error_message)."""
    tree = h.tree
    if len(h.nodes) != len(tree.nodes):
        return False, f"{len(h.nodes)} generator records for {len(tree.nodes)} tree nodes"
    for node_id in postorder(tree):
        node = h.nodes[node_id]
        info = tree.node(node_id)
        is_root = tree.is_root(node_id)
        if tree.is_leaf(node_id):
            if node.D is None or node.D.shape != (info.size, info.size):
                return False, f"leaf {node_id} needs a {info.size}x{info.size} D block"
            expected_rows = info.size
        else:
            left, right = tree.children(node_id)
            l_node, r_node = h.nodes[left], h.nodes[right]
            if node.B12 is None or node.B21 is None:
                return False, f"node {node_id} is missing B blocks"
            if node.B12.shape != (l_node.row_rank, r_node.col_rank):
                return False, f"B12 at node {node_id} is {node.B12.shape}"
            if node.B21.shape != (r_node.row_rank, l_node.col_rank):
                return False, f"B21 at node {node_id} is {node.B21.shape}"
            expected_rows = l_node.row_rank + r_node.row_rank
            expected_cols = l_node.col_rank + r_node.col_rank
            if not is_root and node.V is not None and node.V.rows != expected_cols:
                return False, f"V at node {node_id} has {node.V.rows} rows, expected {expected_cols}"
        if is_root:
            continue
        if node.U is None or node.V is None:
            return False, f"node {node_id} is missing U or V"
        if node.U.rows != expected_rows:
            return False, f"U at node {node_id} has {node.U.rows} rows, expected {expected_rows}"
        if tree.is_leaf(node_id) and node.V.rows != info.size:
            return False, f"V at leaf {node_id} has {node.V.rows} rows, expected {info.size}"
        if node.row_index.size != node.row_rank or node.col_index.size != node.col_rank:
            return False, f"selected index sets at node {node_id} do not match the ranks"
    return True, None


def _require_valid(h: HssForm) -> None:
    ok, message = check_form(h)
    if not ok:
        raise CorruptFormError(message or "corrupt form")


def _big_bases(h: HssForm) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    tree = h.tree
    u_big: dict[int, np.ndarray] = {}
    v_big: dict[int, np.ndarray] = {}
    for node_id in postorder(tree):
        if tree.is_root(node_id):
            continue
        node = h.nodes[node_id]
        assert node.U is not None and node.V is not None
        if tree.is_leaf(node_id):
            u_big[node_id] = node.U.expand()
            v_big[node_id] = node.V.expand()
            continue
        left, right = tree.children(node_id)
        u_big[node_id] = _block_diag(u_big[left], u_big[right]) @ node.U.expand()
        v_big[node_id] = _block_diag(v_big[left], v_big[right]) @ node.V.expand()
    return u_big, v_big


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def reconstruct_dense(h: HssForm) -> np.ndarray:
    """Expand the form into an explicit n x n matrix (testing only)."""
    _require_valid(h)
    tree = h.tree
    u_big, v_big = _big_bases(h)
    A = np.zeros((h.n, h.n))
    for node_id in postorder(tree):
        info = tree.node(node_id)
        node = h.nodes[node_id]
        if tree.is_leaf(node_id):
            A[info.lo : info.hi, info.lo : info.hi] = node.D
            continue
        left, right = (tree.node(c) for c in tree.children(node_id))
        A[left.lo : left.hi, right.lo : right.hi] = u_big[left.id] @ node.B12 @ v_big[right.id].T
        A[right.lo : right.hi, left.lo : left.hi] = u_big[right.id] @ node.B21 @ v_big[left.id].T
    return A


def hss_max_rank(h: HssForm) -> int:
    return max((max(node.row_rank, node.col_rank) for node in h.nodes), default=0)


def node_ranks(h: HssForm) -> list[tuple[int, int, int]]:
    """(node, row rank, column rank) for every non-root node, in postorder."""
    return [
        (node_id, h.nodes[node_id].row_rank, h.nodes[node_id].col_rank)
        for node_id in postorder(h.tree)
        if not h.tree.is_root(node_id)
    ]


def factor_bytes(h: HssForm) -> int:
    """Storage of D, B, the E blocks and the permutation vectors."""
    reals = 0
    indices = 0
    for node in h.nodes:
        if node.D is not None:
            reals += node.D.size
        for block in (node.B12, node.B21):
            if block is not None:
                reals += block.size
        for basis in (node.U, node.V):
            if basis is not None:
                reals += basis.E.size
                indices += basis.perm.size
    return reals * REAL_BYTES + indices * INDEX_BYTES


def dense_bytes(n: int) -> int:
    return n * n * REAL_BYTES


def sampling_bytes(n: int, d: int) -> int:
    """Random vectors and samples for both row and column sampling."""
    return 4 * n * d * REAL_BYTES


def memory_overhead(h_bytes: int, ulv_bytes: int, aux_bytes: int, dense: int) -> float:
    """(mem_str - mem_sca) / mem_str with mem_str = dense + hss + ulv + aux and mem_sca = dense."""
    total = dense + h_bytes + ulv_bytes + aux_bytes
    if total == 0:
        return 0.0
    return (total - dense) / total


def memory_overhead_vs_dense(h_bytes: int, ulv_bytes: int, aux_bytes: int, dense: int) -> float:
    """Same difference divided by the dense footprint."""
    if dense == 0:
        return 0.0
    return (h_bytes + ulv_bytes + aux_bytes) / dense


def hankel_rank_oracle(source: MatrixSource, tree: ClusterTree, node: int, eps: float, max_n: int = 4096) -> int:
    """eps-rank of the row and column Hankel strips A(I, I0 \\ I) and A(I0 \\ I, I).

    Returns the larger of the two, which is what an HSS generator at ``node``
    has to capture.
    """
    if source.n > max_n:
        raise OracleRefusedError(f"n = {source.n} exceeds the dense oracle cap {max_n}")
    if not 0 <= node < len(tree.nodes):
        raise InvalidArgumentError(f"node {node} is not in the tree")
    info = tree.node(node)
    inside = np.arange(info.lo, info.hi)
    outside = np.concatenate([np.arange(0, info.lo), np.arange(info.hi, tree.n)])
    if outside.size == 0:
        return 0
    row_strip = source.extract(inside, outside)
    col_strip = source.extract(outside, inside)
    return max(id_compress(row_strip, eps).rank, id_compress(col_strip.T, eps).rank)


# --- HSSF0001 container -----------------------------------------------------
#
# magic | u64 version | u64 n | f64 eps | u64 d_used | u64 node_count
# node_count x (u64 lo, u64 hi, i64 left, i64 right)        tree, id order
# per node in postorder: u64 id, u64 flags, then the present fields
#   flags bit 0: D   bit 1: U, V   bit 2: B12, B21
#   matrix: u64 rows, u64 cols, rows*cols f64 (row-major)
#   basis:  u64 rows, u64 rank, rows u64 perm, E matrix
#   index:  u64 length, length u64

_FLAG_D = 1
_FLAG_UV = 2
_FLAG_B = 4


def _write_u64(out: io.BytesIO, *values: int) -> None:
    out.write(np.asarray(values, dtype="<u8").tobytes())


def _write_matrix(out: io.BytesIO, a: np.ndarray) -> None:
    _write_u64(out, a.shape[0], a.shape[1])
    out.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _write_index(out: io.BytesIO, idx: np.ndarray) -> None:
    _write_u64(out, idx.size)
    out.write(np.asarray(idx, dtype="<u8").tobytes())


def _write_basis(out: io.BytesIO, basis: PermutedBasis) -> None:
    _write_u64(out, basis.rows, basis.rank)
    out.write(np.asarray(basis.perm, dtype="<u8").tobytes())
    _write_matrix(out, basis.E)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def take(self, count: int, dtype: str) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        end = self._pos + count * width
        if end > len(self._data):
            raise FormatError("truncated form file")
        values = np.frombuffer(self._data, dtype=dtype, count=count, offset=self._pos)
        self._pos = end
        return values

    def u64(self) -> int:
        return int(self.take(1, "<u8")[0])

    def matrix(self) -> np.ndarray:
        rows, cols = self.u64(), self.u64()
        return self.take(rows * cols, "<f8").reshape(rows, cols).astype(float)

    def index(self) -> np.ndarray:
        return self.take(self.u64(), "<u8").astype(np.int64)

    def basis(self) -> PermutedBasis:
        rows, rank = self.u64(), self.u64()
        perm = self.take(rows, "<u8").astype(np.int64)
        E = self.matrix()
        if E.shape != (rows - rank, rank):
            raise FormatError("basis E block has the wrong shape")
        return PermutedBasis(perm=perm, E=E)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def save_form(h: HssForm, path: str | Path) -> None:
    _require_valid(h)
    out = io.BytesIO()
    out.write(FORM_FILE_MAGIC)
    _write_u64(out, FORM_FILE_VERSION, h.n)
    out.write(struct.pack("<d", h.eps))
    _write_u64(out, h.d_used, len(h.tree.nodes))
    for info in h.tree.nodes:
        left, right = info.children if info.children else (-1, -1)
        _write_u64(out, info.lo, info.hi)
        out.write(np.asarray([left, right], dtype="<i8").tobytes())
    for node_id in postorder(h.tree):
        node = h.nodes[node_id]
        flags = (
            (_FLAG_D if node.D is not None else 0)
            | (_FLAG_UV if node.U is not None else 0)
            | (_FLAG_B if node.B12 is not None else 0)
        )
        _write_u64(out, node_id, flags)
        if node.D is not None:
            _write_matrix(out, node.D)
        if node.U is not None and node.V is not None:
            _write_basis(out, node.U)
            _write_basis(out, node.V)
            _write_index(out, node.row_index)
            _write_index(out, node.col_index)
        if node.B12 is not None and node.B21 is not None:
            _write_matrix(out, node.B12)
            _write_matrix(out, node.B21)
    Path(path).write_bytes(out.getvalue())


def load_form(path: str | Path) -> HssForm:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read form {path}: {e}") from e
    if data[: len(FORM_FILE_MAGIC)] != FORM_FILE_MAGIC:
        raise FormatError(f"{path} is not an HSSF0001 file")
    reader = _Reader(data[len(FORM_FILE_MAGIC) :])
    version = reader.u64()
    if version != FORM_FILE_VERSION:
        raise FormatError(f"unsupported form version {version}")
    n = reader.u64()
    eps = float(reader.take(1, "<f8")[0])
    d_used, count = reader.u64(), reader.u64()

    entries: list[TreeNodeDocument] = []
    for _ in range(count):
        lo, hi = reader.u64(), reader.u64()
        left, right = (int(v) for v in reader.take(2, "<i8"))
        entries.append(TreeNodeDocument(lo=lo, hi=hi, children=[] if left < 0 else [left, right]))
    tree = tree_from_document(TreeDocument(n=n, nodes=entries))
    ok, message = validate_tree(tree)
    if not ok:
        raise FormatError(f"stored tree is invalid: {message}")

    nodes = [HssNode() for _ in range(count)]
    for _ in range(count):
        node_id, flags = reader.u64(), reader.u64()
        if node_id >= count:
            raise FormatError(f"node record {node_id} out of range")
        node = nodes[node_id]
        if flags & _FLAG_D:
            node.D = reader.matrix()
        if flags & _FLAG_UV:
            node.U = reader.basis()
            node.V = reader.basis()
            node.row_index = reader.index()
            node.col_index = reader.index()
        if flags & _FLAG_B:
            node.B12 = reader.matrix()
            node.B21 = reader.matrix()
    if not reader.exhausted:
        raise FormatError("trailing bytes after the last node record")

    form = HssForm(tree=tree, nodes=nodes, eps=eps, d_used=d_used)
    ok, message = check_form(form)
    if not ok:
        raise FormatError(f"stored form is inconsistent: {message}")
    return form
