#!/usr/bin/env python3
"""Builds CMUDict grapheme-to-phoneme splits with reference alignments.

Writes train/valid/test.tsv through `nsed prepare transduction`, then aligns
letters to phonemes with eflomal in both directions, symmetrizes the links with
grow-diag-final-and and stores one 0-based Pharaoh line per row as
`<split>.align`.

Requires the `cmudict` and `eflomal` Python packages and a built `nsed` binary.
"""

import argparse
import pathlib
import re
import subprocess
import sys
import tempfile

import cmudict
import eflomal

WORD = re.compile(r"^[a-z]+(\(\d+\))?$")


def write_plain_dict(path):
    kept = 0
    with open(path, "w", encoding="utf-8") as out:
        for line in cmudict.dict_string().splitlines():
            line = line.split(" #")[0].strip()
            if not line:
                continue
            word, phones = line.split(maxsplit=1)
            if not WORD.match(word):
                continue
            phones = " ".join(re.sub(r"\d", "", p) for p in phones.split())
            out.write(f"{word} {phones}\n")
            kept += 1
    return kept


def read_tsv(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                src, tgt = line.rstrip("\n").split("\t")
                rows.append((list(src.strip()), tgt.split()))
    return rows


def read_links(path):
    with open(path, encoding="utf-8") as f:
        return [{tuple(map(int, tok.split("-"))) for tok in line.split()} for line in f]


def grow_diag_final_and(fwd, rev, n, m):
    """Koehn's symmetrization; `fwd` and `rev` hold (source, target) links."""
    union = fwd | rev
    links = fwd & rev
    neighbours = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]

    def aligned_src(i):
        return any(a == i for a, _ in links)

    def aligned_tgt(j):
        return any(b == j for _, b in links)

    added = True
    while added:
        added = False
        for i, j in sorted(links):
            for di, dj in neighbours:
                a, b = i + di, j + dj
                if not (0 <= a < n and 0 <= b < m) or (a, b) in links or (a, b) not in union:
                    continue
                if not aligned_src(a) or not aligned_tgt(b):
                    links.add((a, b))
                    added = True
    for directed in (fwd, rev):
        for a, b in sorted(directed):
            if not aligned_src(a) and not aligned_tgt(b):
                links.add((a, b))
    return links


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/cmudict"))
    p.add_argument("--nsed", default="target/release/nsed")
    p.add_argument("--groups", type=int, default=10000)
    p.add_argument("--valid", type=int, default=500)
    p.add_argument("--test", type=int, default=500)
    p.add_argument("--seed", type=int, default=13)
    args = p.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    plain = args.out / "cmudict.plain"
    print(f"entries={write_plain_dict(plain)}", file=sys.stderr)
    subprocess.run(
        [args.nsed, "--seed", str(args.seed), "prepare", "transduction", "--input", str(plain),
         "--format", "cmudict", "--out", str(args.out), "--valid", str(args.valid), "--test", str(args.test),
         "--max-groups", str(args.groups)],
        check=True,
    )

    splits = ["train", "valid", "test"]
    rows = {s: read_tsv(args.out / f"{s}.tsv") for s in splits}
    everything = [r for s in splits for r in rows[s]]
    with tempfile.TemporaryDirectory() as tmp:
        fwd_path, rev_path = pathlib.Path(tmp, "fwd"), pathlib.Path(tmp, "rev")
        eflomal.Aligner().align(
            [" ".join(src) for src, _ in everything],
            [" ".join(tgt) for _, tgt in everything],
            links_filename_fwd=str(fwd_path),
            links_filename_rev=str(rev_path),
        )
        fwd, rev = read_links(fwd_path), read_links(rev_path)
    if len(fwd) != len(everything) or len(rev) != len(everything):
        sys.exit("eflomal returned the wrong number of alignments")

    k = 0
    for s in splits:
        with open(args.out / f"{s}.align", "w", encoding="utf-8") as out:
            for src, tgt in rows[s]:
                links = grow_diag_final_and(fwd[k], rev[k], len(src), len(tgt))
                out.write(" ".join(f"{a}-{b}" for a, b in sorted(links)) + "\n")
                k += 1
        print(f"{s}={len(rows[s])}", file=sys.stderr)


if __name__ == "__main__":
    main()
