from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "engine"))

from app.cli import main as cli_main  # noqa: E402
from app.cli_config import load_config  # noqa: E402
from app.services.simharness import generate_dataset  # noqa: E402
from app.utils.csv_io import write_design_csv  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(
        description="Smoke test: analyze, simulate and render the smoke config.",
    )
    parser.add_argument("--config", default=str(ROOT / "configs" / "smoke.cfg"))
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="modelconf_"))
    config, _ = load_config(args.config)
    X, y = generate_dataset(config, 0)
    design = out / "design.csv"
    out.mkdir(parents=True, exist_ok=True)
    write_design_csv(design, X, y)
    code = cli_main(
        [
            "analyze",
            str(design),
            "--max-keep",
            str(config.max_keep),
            "--max-model-size",
            str(config.max_model_size),
            "--out",
            str(out / "analyze"),
        ]
    )
    if code != 0:
        raise SystemExit(f"analyze failed with exit code {code}")
    if not (out / "analyze" / "models.jsonl").is_file():
        raise SystemExit("missing output: models.jsonl")

    code = cli_main(["simulate", args.config, "--out", str(out)])
    if code != 0:
        raise SystemExit(f"simulate failed with exit code {code}")
    for name in ("results.csv", "results.txt", "replicates.csv", "manifest.json"):
        if not (out / name).is_file():
            raise SystemExit(f"missing output: {name}")
    code = cli_main(["report", str(out / "results.csv"), "--format", "markdown"])
    if code != 0:
        raise SystemExit(f"report failed with exit code {code}")
    print(f"smoke ok: {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
