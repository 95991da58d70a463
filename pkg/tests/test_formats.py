import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentline import formats
from latentline.errors import FormatError
from latentline.model_core import Decay, ModelParams, PositionVector, RandomGraph, sample_graph, sample_positions


def write(tmp_path, text, name="f.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestPositions:

    def test_round_trip_exact(self, tmp_path):
        X = PositionVector(25.0, [0.0, 1 / 3, 24.999999999999996, 25.0])
        p = tmp_path / "x.txt"
        formats.write_positions(p, X, {"seed": 7})
        Y = formats.read_positions(p)
        assert Y.n == 25.0 and np.array_equal(X.positions, Y.positions)

    @given(st.lists(st.floats(0, 25), max_size=40))
    def test_round_trip_property(self, xs):
        import tempfile
        with tempfile.TemporaryDirectory() as d:
            p = f"{d}/x.txt"
            formats.write_positions(p, PositionVector(25.0, xs))
            assert formats.read_positions(p).positions.tolist() == [float(v) for v in xs]

    def test_config_lines(self, tmp_path):
        p = tmp_path / "x.txt"
        formats.write_positions(p, PositionVector(5.0, [1.0]), {"seed": 3, "model": "exp"})
        lines = p.read_text().splitlines()
        assert lines[:5] == ["latent-line-positions v1", "n=5.0", "m=1", "# seed=3", "# model=exp"]

    def test_empty(self, tmp_path):
        p = tmp_path / "x.txt"
        formats.write_positions(p, PositionVector(5.0, []))
        assert formats.read_positions(p).m == 0

    @pytest.mark.parametrize("text", [
        "wrong magic\nn=5\nm=1\n1.0\n",
        "latent-line-positions v1\nm=1\nn=5\n1.0\n",
        "latent-line-positions v1\nn=5\nm=2\n1.0\n",
        "latent-line-positions v1\nn=5\nm=1\nabc\n",
        "latent-line-positions v1\nn=5\nm=1\n7.0\n",
        "latent-line-positions v1\nn=inf\nm=1\n1.0\n",
        "latent-line-positions v1\nn=5\n",
    ])
    def test_malformed(self, tmp_path, text):
        with pytest.raises(FormatError):
            formats.read_positions(write(tmp_path, text))


class TestGraph:

    def test_round_trip(self, tmp_path):
        p = ModelParams(25.0, 1.0, "exp")
        G = sample_graph(sample_positions(400, p, 1), p, 2)
        path = tmp_path / "g.txt"
        formats.write_graph(path, G, formats.GraphHeader(25.0, 400, "exp", 1.0, 9), {"delta": 0.05})
        H, header = formats.read_graph(path)
        assert H == G
        assert header.model is Decay.EXPONENTIAL and header.seed == 9 and header.c == 1.0
        assert header.config == {"delta": "0.05"}

    def test_edge_lines_sorted(self, tmp_path):
        G = RandomGraph.from_edges(4, [(2, 3), (0, 2), (0, 1)])
        path = tmp_path / "g.txt"
        formats.write_graph(path, G, formats.GraphHeader(5.0, 4, "lin", 0.5, 0))
        body = path.read_text().splitlines()[6:]
        assert body == ["0 1", "0 2", "2 3"]

    def test_empty_graph(self, tmp_path):
        path = tmp_path / "g.txt"
        formats.write_graph(path, RandomGraph.from_edges(0, []), formats.GraphHeader(5.0, 0, "exp", 1.0, 0))
        G, _ = formats.read_graph(path)
        assert G.m == 0 and G.edge_count == 0

    HEAD = "latent-line-graph v1\nn=5\nm=3\nmodel=exp\nc=1\nseed=0\n"

    @pytest.mark.parametrize("body", [
        "0 3\n",        # out of range
        "1 0\n",        # i > j
        "1 1\n",        # loop
        "0 2\n0 1\n",   # unsorted
        "0 1\n0 1\n",   # duplicate
        "0 1 2\n",      # odd count
        "0 x\n",        # not an integer
        "0 1.5\n",
        "-1 2\n",
    ])
    def test_bad_edges(self, tmp_path, body):
        with pytest.raises(FormatError):
            formats.read_graph(write(tmp_path, self.HEAD + body))

    @pytest.mark.parametrize("head", [
        "latent-line-graph v2\nn=5\nm=3\nmodel=exp\nc=1\nseed=0\n",
        "latent-line-graph v1\nn=5\nm=3\nmodel=cubic\nc=1\nseed=0\n",
        "latent-line-graph v1\nn=5\nm=3\nmodel=exp\nc=1.5\nseed=0\n",
        "latent-line-graph v1\nn=5\nm=3\nmodel=exp\nseed=0\n",
        "latent-line-graph v1\nn=5\nm=three\nmodel=exp\nc=1\nseed=0\n",
    ])
    def test_bad_header(self, tmp_path, head):
        with pytest.raises(FormatError):
            formats.read_graph(write(tmp_path, head + "0 1\n"))

    def test_comments_between_edges(self, tmp_path):
        G, _ = formats.read_graph(write(tmp_path, self.HEAD + "# note\n0 1\n\n1 2\n"))
        assert G.edge_count == 2


class TestOrder:

    def test_round_trip(self, tmp_path, rng):
        order = rng.permutation(50)
        path = tmp_path / "o.txt"
        formats.write_order(path, order, {"seed": 1})
        assert np.array_equal(formats.read_order(path), order)

    @pytest.mark.parametrize("body", ["0\n0\n", "1\n2\n", "0\nx\n"])
    def test_not_permutation(self, tmp_path, body):
        with pytest.raises(FormatError):
            formats.read_order(write(tmp_path, "latent-line-order v1\n" + body))


class TestCsv:

    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        formats.write_csv(path, ("a", "b"), [(1, 0.1), (2, 1 / 3)], {"seed": 4})
        text = path.read_text().splitlines()
        assert text[0] == "# seed=4" and text[1] == "a,b"
        rows = formats.read_csv(path)
        assert rows[1] == {"a": "2", "b": repr(1 / 3)}

    def test_scores(self, tmp_path):
        path = tmp_path / "s.csv"
        formats.write_scores(path, np.array([-2, 0, 2]))
        assert [r["R"] for r in formats.read_csv(path)] == ["-2", "0", "2"]

    def test_format_real(self):
        assert float(formats.format_real(0.1 + 0.2)) == 0.1 + 0.2
