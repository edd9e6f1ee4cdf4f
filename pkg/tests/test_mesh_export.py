"""网格导出: JSON / OFF、子集过滤、无穷远单形、重心细分与读回"""
import json

import pytest

from src.core.defnfun import StackPresentation
from src.core.errors import InputError, SchemaError, UnsupportedFormatError
from src.generators.gen_full import triangulate
from src.utils.mesh_export import (
    MESH_FORMAT, StratifiedMesh, export_mesh, load_mesh, mesh_from_triangulation, subdivide_mesh,
)


@pytest.fixture
def triangle_mesh(triangle, fast_config):
    return mesh_from_triangulation(triangulate(triangle, config=fast_config))


@pytest.fixture
def half_line_tri(fast_config):
    S = StackPresentation(1, intervals=[(0, None)], cuts=[1], selected={"far": {"i+inf"}})
    return triangulate(S, ["far"], fast_config)


def test_square_mesh(square, fast_config, tmp_path):
    mesh = mesh_from_triangulation(triangulate(square, config=fast_config))
    assert len(mesh.vertices) == 9
    assert len(mesh.simplices) == 33
    assert mesh.dim == 2
    path = export_mesh(mesh, tmp_path / "square.off")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == "9 8 0"


def test_mesh_records(triangle_mesh):
    assert [s["id"] for s in triangle_mesh.simplices[:3]] == ["s0", "s1", "s2"]
    dims = [s["dim"] for s in triangle_mesh.simplices]
    assert dims == sorted(dims)
    assert [len(triangle_mesh.of_dim(k)) for k in range(3)] == [7, 12, 6]
    assert all(s["source"] for s in triangle_mesh.simplices)
    assert triangle_mesh.to_complex().counts() == {0: 7, 1: 12, 2: 6}


def test_subset_filter(triangle, fast_config):
    tri = triangulate(triangle, config=fast_config)
    mesh = mesh_from_triangulation(tri, triangle.subset_cells("hyp"))
    assert all(s["source"] == "g2[i0]" for s in mesh.simplices)
    assert [s["dim"] for s in mesh.simplices] == [0, 1, 1]
    assert len(mesh.vertices) == 3
    assert all(v[0] == v[1] for v in mesh.vertices)


def test_points_at_infinity_are_omitted(half_line_tri):
    mesh = mesh_from_triangulation(half_line_tri)
    assert mesh.notes == ["2 simplex(es) touching points at infinity omitted"]
    assert len(mesh.simplices) == 3
    assert len(mesh.vertices) == 2
    assert mesh.to_dict()["notes"] == mesh.notes


def test_json_round_trip(triangle_mesh, tmp_path):
    path = export_mesh(triangle_mesh, tmp_path / "out" / "tri.json")
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["format"] == MESH_FORMAT
    assert "notes" not in data
    back = load_mesh(path)
    assert back.ambient_dim == 2
    assert back.vertices == triangle_mesh.vertices
    assert back.simplices == triangle_mesh.simplices


def test_off_needs_triangles(half_line_tri, tmp_path):
    mesh = mesh_from_triangulation(half_line_tri)
    with pytest.raises(UnsupportedFormatError):
        export_mesh(mesh, tmp_path / "line.off")
    assert not (tmp_path / "line.off").exists()


def test_off_rejects_high_dimensional_meshes(tmp_path):
    mesh = StratifiedMesh(4, vertices=[(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0)],
                          simplices=[{"id": "s0", "vertices": [0, 1, 2], "dim": 2, "stratum": None, "source": None}])
    with pytest.raises(UnsupportedFormatError):
        export_mesh(mesh, tmp_path / "high.off")


def test_empty_off(tmp_path):
    path = export_mesh(StratifiedMesh(2), tmp_path / "empty.off")
    assert path.read_text(encoding="utf-8") == "OFF\n0 0 0\n"


def test_unknown_format(triangle_mesh, tmp_path):
    with pytest.raises(UnsupportedFormatError):
        export_mesh(triangle_mesh, tmp_path / "tri.stl")
    with pytest.raises(UnsupportedFormatError):
        export_mesh(triangle_mesh, tmp_path / "tri.json", format="ply")


def test_explicit_format_wins(triangle_mesh, tmp_path):
    path = export_mesh(triangle_mesh, tmp_path / "tri.txt", format="off")
    assert path.read_text(encoding="utf-8").startswith("OFF\n7 6 0")


def test_subdivide_mesh(triangle_mesh):
    fine = subdivide_mesh(triangle_mesh, 1)
    assert len(fine.of_dim(2)) == 36
    assert len(fine.vertices) == 25
    assert all(s["stratum"] is not None and s["source"] is not None for s in fine.simplices)
    assert {s["source"] for s in fine.of_dim(2)} == {s["source"] for s in triangle_mesh.of_dim(2)}
    same = subdivide_mesh(triangle_mesh, 0)
    assert len(same.simplices) == len(triangle_mesh.simplices)
    with pytest.raises(InputError):
        subdivide_mesh(triangle_mesh, -1)


def test_malformed_mesh_files(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "format": MESH_FORMAT, "version": 1, "ambient_dim": 2,
        "vertices": [[0, 0], [1, 0]],
        "simplices": [{"id": "s0", "vertices": [0, 5], "dim": 1}],
    }), encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        load_mesh(path)
    assert info.value.pointers == ["simplices.s0"]

    path.write_text(json.dumps({"format": MESH_FORMAT, "version": 1, "vertices": [], "simplices": []}),
                    encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        load_mesh(path)
    assert info.value.pointers == ["ambient_dim"]

    path.write_text(json.dumps({"format": "obj", "version": 1, "ambient_dim": 2, "vertices": [], "simplices": []}),
                    encoding="utf-8")
    with pytest.raises(UnsupportedFormatError):
        load_mesh(path)

    with pytest.raises(InputError):
        load_mesh(tmp_path / "missing.json")
