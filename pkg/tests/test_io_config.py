import struct

import numpy as np
import pytest

from supercg import io
from supercg.bench import DEFAULT_GAMMA0, ExperimentConfig, MethodParams
from supercg.config import ConfigError, parse_config
from supercg.operators import Image, Sinogram


def test_img1_layout_and_roundtrip(tmp_path):
    img = Image(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), width=3, height=2)
    p = tmp_path / "a.img"
    io.write_image(p, img)
    raw = p.read_bytes()
    assert raw[:4] == b"IMG1"
    assert struct.unpack("<II", raw[4:12]) == (3, 2)
    assert struct.unpack("<6d", raw[12:]) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    back = io.read_image(p)
    assert (back.width, back.height) == (3, 2)
    np.testing.assert_array_equal(back.values, img.values)


def test_sgm1_roundtrip_and_errors(tmp_path):
    s = Sinogram(np.arange(12.0), n_angles=3, n_rays=4)
    p = tmp_path / "s.sgm"
    io.write_sinogram(p, s)
    assert p.read_bytes()[:4] == b"SGM1"
    back = io.read_sinogram(p)
    assert (back.n_angles, back.n_rays) == (3, 4)
    np.testing.assert_array_equal(back.values, s.values)
    with pytest.raises(io.FormatError):
        io.read_image(p)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(io.FormatError):
        io.read_sinogram(p)
    (tmp_path / "short").write_bytes(b"SG")
    with pytest.raises(io.FormatError):
        io.read_sinogram(tmp_path / "short")


def test_meta_roundtrip_preserves_floats(tmp_path):
    p = tmp_path / "x.meta"
    sigma2 = 0.1 + 0.2
    io.write_meta(p, {"sigma2": sigma2, "seed": 7, "n_angles": 3})
    meta = io.read_meta(p)
    assert float(meta["sigma2"]) == sigma2
    assert meta["seed"] == "7"
    assert io.meta_path(tmp_path / "run.sgm") == tmp_path / "run.meta"


def test_pgm_header_and_scaling(tmp_path):
    p = tmp_path / "a.pgm"
    io.write_pgm(p, np.array([[0.0, 0.5], [1.0, 0.25]]))
    raw = p.read_bytes()
    lines = raw.split(b"\n", 4)
    assert lines[0] == b"P5"
    assert lines[1].startswith(b"# linear scaling: min=0.0 max=1.0")
    assert lines[2] == b"2 2" and lines[3] == b"65535"
    vals = struct.unpack(">4H", lines[4])
    assert vals == (0, 32768, 65535, 16384)


def test_csv_uses_lf(tmp_path):
    p = tmp_path / "m.csv"
    io.write_csv(p, [["method", "k"], ["cg", "1"]])
    assert p.read_bytes() == b"method,k\ncg,1\n"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write(tmp_path / "sub" / "f.bin", b"abc")
    assert [q.name for q in (tmp_path / "sub").iterdir()] == ["f.bin"]


def test_config_defaults_and_overrides():
    cfg = parse_config("""
        # desk run
        size = 64
        methods = cg, s-cg, S-PCG-2, fista
        eps = auto
        a = 0.9
        [method.s-cg]
        gamma0 = 0.5
        [method.fista]
        lambda = 3.0
    """)
    assert cfg.size == 64 and cfg.angles == ExperimentConfig().angles
    assert cfg.methods == ("cg", "s-cg", "s-pcg-2", "fista")
    assert cfg.params == MethodParams(a=0.9)
    assert cfg.for_method("s-cg").gamma0 == 0.5 and cfg.for_method("s-cg").a == 0.9
    assert cfg.for_method("fista").lam == 3.0
    assert cfg.for_method("s-pcg-2").gamma0 == DEFAULT_GAMMA0["s-pcg-2"]


@pytest.mark.parametrize("text, line", [
    ("size = 64\nbogus = 1\n", 2),
    ("size = 64\n\n[method.nope]\n", 3),
    ("size = x\n", 1),
    ("size = 64\nnot a pair\n", 2),
    ("[method.cg\n", 1),
    ("[solver]\n", 1),
    ("\n\na = 1.5\n", 3),
    ("eps = -1\n", 1),
    ("methods = cg, xyz\n", 1),
    ("noise = 0\n", 1),
    ("[method.s-cg]\nsize = 3\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as ei:
        parse_config(text, source="run.cfg")
    assert ei.value.line == line
    assert f"run.cfg:{line}:" in str(ei.value)
