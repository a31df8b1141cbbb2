import json
from pathlib import Path

import pytest

from render import RecipeError, main, render

FIGS_DIR = Path(__file__).resolve().parents[1]
RECIPES = sorted((FIGS_DIR / "recipes").glob("*.json"))
GOLDEN = FIGS_DIR / "tests" / "golden"


def load(recipe_path):
    with open(recipe_path) as f:
        return json.load(f)


class TestAllRecipes:
    def test_eight_recipes_ship(self):
        assert len(RECIPES) == 8

    @pytest.mark.parametrize("recipe_path", RECIPES, ids=lambda p: p.stem)
    def test_renders_from_golden_csv(self, recipe_path, tmp_path):
        out = render(load(recipe_path), str(tmp_path / f"{recipe_path.stem}.svg"),
                     recipe_dir=recipe_path.parent)
        assert out.exists() and out.stat().st_size > 1000

    @pytest.mark.parametrize("recipe_path", RECIPES, ids=lambda p: p.stem)
    def test_byte_deterministic(self, recipe_path, tmp_path):
        a = render(load(recipe_path), str(tmp_path / "a.svg"),
                   recipe_dir=recipe_path.parent)
        b = render(load(recipe_path), str(tmp_path / "b.svg"),
                   recipe_dir=recipe_path.parent)
        assert a.read_bytes() == b.read_bytes()


class TestErrors:
    def test_empty_csv_rejected_and_no_file_written(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        recipe = {"figure_id": "fig2", "input_csv": str(empty)}
        out = tmp_path / "out.svg"
        with pytest.raises(RecipeError, match="empty"):
            render(recipe, str(out))
        assert not out.exists()

    def test_header_only_csv_rejected(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("N,beta,omega,epsilon,delta,T_parallel,T_collective,gamma\n")
        with pytest.raises(RecipeError, match="no data rows"):
            render({"figure_id": "fig2", "input_csv": str(p)}, str(tmp_path / "o.svg"))

    def test_schema_mismatch_names_columns(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("N,beta,gamma\n1,0.5,1.0\n")
        with pytest.raises(RecipeError, match="T_parallel"):
            render({"figure_id": "fig2", "input_csv": str(p)}, str(tmp_path / "o.svg"))

    def test_unknown_figure_id(self, tmp_path):
        with pytest.raises(RecipeError, match="figure_id"):
            render({"figure_id": "fig99", "input_csv": "x.csv"},
                   str(tmp_path / "o.svg"))

    def test_missing_csv(self, tmp_path):
        with pytest.raises(RecipeError, match="not found"):
            render({"figure_id": "fig2", "input_csv": str(tmp_path / "nope.csv")},
                   str(tmp_path / "o.svg"))

    def test_cli_exit_codes(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["--recipe", str(bad), "--out", str(tmp_path / "o.svg")]) == 2
        good = RECIPES[0]
        assert main(["--recipe", str(good), "--out", str(tmp_path / "ok.svg")]) == 0
