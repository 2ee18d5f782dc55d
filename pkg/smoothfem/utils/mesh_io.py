import logging

from smoothfem.errors import MeshError, MeshFormatError
from smoothfem.models.mesh import ELEMENT_NODES, Mesh

logger = logging.getLogger('mesh_io')


def _number(text, kind, line):
    try:
        return kind(text)
    except ValueError:
        raise MeshFormatError(f"expected {'an integer' if kind is int else 'a number'}, got {text!r}", line=line)


def format_mesh(mesh):
    """Render a mesh in the plain-text `mesh/v/e/b` format"""
    lines = [f"mesh {mesh.kind} {mesh.n_vertices} {mesh.n_elements} {len(mesh.boundary_edges)}"]
    for i, (x, y) in enumerate(mesh.vertices.tolist()):
        lines.append(f"v {i} {x!r} {y!r}")
    for e, nodes in enumerate(mesh.elements.tolist()):
        lines.append(f"e {e} " + ' '.join(str(v) for v in nodes))
    for (p, q), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags):
        lines.append(f"b {p} {q} {tag}")
    return '\n'.join(lines) + '\n'


def write_mesh(mesh, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(format_mesh(mesh))
    logger.info(f"Wrote {mesh} to {path}")


def parse_mesh(text):
    """
    Parse the plain-text mesh format

    Vertex and element ids must run 0..n-1 in order; blank lines and
    `#` comments are skipped.

    Returns:
        Mesh
    """
    header = None
    vertices, elements, edges, tags = [], [], [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split('#', 1)[0].split()
        if not fields:
            continue
        tag = fields[0]
        if header is None:
            if tag != 'mesh' or len(fields) != 5:
                raise MeshFormatError("expected header 'mesh <kind> <n_vertices> <n_elements> <n_boundary>'",
                                      line=number)
            kind = fields[1]
            if kind not in ELEMENT_NODES:
                raise MeshFormatError(f"unknown element kind {kind!r}", line=number)
            header = (kind, *(_number(f, int, number) for f in fields[2:]))
            continue

        kind = header[0]
        if tag == 'v':
            if len(fields) != 4:
                raise MeshFormatError("vertex line needs 'v <id> <x> <y>'", line=number)
            if _number(fields[1], int, number) != len(vertices):
                raise MeshFormatError(f"vertex id {fields[1]} out of sequence", line=number)
            vertices.append((_number(fields[2], float, number), _number(fields[3], float, number)))
        elif tag == 'e':
            count = ELEMENT_NODES[kind]
            if len(fields) != count + 2:
                raise MeshFormatError(f"{kind} element line needs an id and {count} vertices", line=number)
            if _number(fields[1], int, number) != len(elements):
                raise MeshFormatError(f"element id {fields[1]} out of sequence", line=number)
            elements.append([_number(f, int, number) for f in fields[2:]])
        elif tag == 'b':
            if len(fields) != 4 or fields[3] not in ('D', 'N'):
                raise MeshFormatError("boundary line needs 'b <v1> <v2> <D|N>'", line=number)
            edges.append((_number(fields[1], int, number), _number(fields[2], int, number)))
            tags.append(fields[3])
        else:
            raise MeshFormatError(f"unknown record type {tag!r}", line=number)

    if header is None:
        raise MeshFormatError("missing mesh header", line=1)
    kind, n_vertices, n_elements, n_boundary = header
    for name, expected, found in (('vertices', n_vertices, len(vertices)),
                                  ('elements', n_elements, len(elements)),
                                  ('boundary edges', n_boundary, len(edges))):
        if expected != found:
            raise MeshFormatError(f"header announces {expected} {name}, file has {found}")
    try:
        return Mesh(vertices, elements, kind, edges, tags)
    except MeshError as e:
        raise MeshFormatError(f"invalid mesh: {e.message}")


def read_mesh(path):
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise MeshFormatError(f"cannot read mesh file {path!r}: {e}")
    mesh = parse_mesh(text)
    logger.info(f"Read {mesh} from {path}")
    return mesh
