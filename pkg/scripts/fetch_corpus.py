"""Rebuild the bundled hostname corpus under data/corpus/.

Sources (both fetched from package registries, the only network the build
sandbox reaches):

* phishing: ``blacklist`` of ``src/config.json`` in the npm package
  ``eth-phishing-detect@1.2.0`` (community-reported phishing hosts).
* legitimate: the Tranco top-sites ranking shipped as
  ``oz_phishingdetector_ml/model/tranco.csv`` in the PyPI wheel
  ``oz-phishingdetector-ml==0.1.3``.

Both lists are hostname-level, so the corpus rows are bare hosts with no scheme
or path. Run from the repository root::

    python scripts/fetch_corpus.py --n 6000
"""
import argparse
import csv
import json
import random
import subprocess
import tarfile
import tempfile
import zipfile
from pathlib import Path

PHISH_PKG = "eth-phishing-detect@1.2.0"
LEGIT_WHEEL = "oz-phishingdetector-ml==0.1.3"


def _phishing_hosts(workdir: Path) -> list[str]:
    subprocess.run(["npm", "pack", PHISH_PKG], cwd=workdir, check=True, capture_output=True)
    tgz = next(workdir.glob("eth-phishing-detect-*.tgz"))
    with tarfile.open(tgz) as tf:
        config = json.load(tf.extractfile("package/src/config.json"))
    return [h.strip() for h in config["blacklist"] if h.strip()]


def _tranco_hosts(workdir: Path, limit: int) -> list[str]:
    subprocess.run(
        ["pip", "download", "--no-deps", "-q", "-d", str(workdir), LEGIT_WHEEL],
        check=True,
        capture_output=True,
    )
    whl = next(workdir.glob("oz_phishingdetector_ml-*.whl"))
    hosts = []
    with zipfile.ZipFile(whl) as zf, zf.open("oz_phishingdetector_ml/model/tranco.csv") as fh:
        for line in fh:
            _, host = line.decode("utf-8").strip().split(",", 1)
            hosts.append(host)
            if len(hosts) >= limit:
                break
    return hosts


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6000, help="hosts per class")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=Path, default=Path("data/corpus"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        phish = _phishing_hosts(work)
        legit_ranked = _tranco_hosts(work, limit=4 * args.n)

    phish_set = set(phish)
    phish = sorted(set(phish))
    random.Random(args.seed).shuffle(phish)
    phish = phish[: args.n]
    # top-ranked hosts, skipping anything also reported as phishing
    legit = [h for h in dict.fromkeys(legit_ranked) if h not in phish_set][: args.n]

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "phish_feed.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "feed"])
        for h in phish:
            w.writerow([h, "eth-phishing-detect"])
    with open(args.out / "legit_list.txt", "w", encoding="utf-8") as fh:
        fh.writelines(h + "\n" for h in legit)
    print(f"wrote {len(phish)} phishing and {len(legit)} legitimate hosts to {args.out}")


if __name__ == "__main__":
    main()
