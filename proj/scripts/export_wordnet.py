#!/usr/bin/env python3
"""Export the WordNet 3.0 noun hierarchy from the Princeton dict files.

Writes, into the output directory:
  noun_edges.tsv   child<TAB>parent for every direct hypernym and
                   instance-hypernym pointer between noun synsets
  synset_map.tsv   word<TAB>synset1,synset2,...  (every noun lemma)

Synset names follow the NLTK convention: first lemma, lowercased, plus
".n." and the two-digit sense index of that synset within the lemma's
entry in index.noun.
"""

import argparse
import collections
import os
import sys


def read_index(path):
    senses = {}
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith("  "):
                continue
            parts = line.split()
            lemma, _pos, synset_cnt, ptr_cnt = parts[0], parts[1], int(parts[2]), int(parts[3])
            offsets = parts[4 + ptr_cnt + 2:]
            assert len(offsets) == synset_cnt, line
            senses[lemma] = offsets
    return senses


def read_data(path):
    lemmas = {}
    parents = collections.defaultdict(list)
    with open(path, encoding="latin-1") as f:
        for line in f:
            if line.startswith("  "):
                continue
            fields = line.split(" | ")[0].split()
            offset = fields[0]
            word_cnt = int(fields[3], 16)
            lemmas[offset] = fields[4]
            i = 4 + 2 * word_cnt
            ptr_cnt = int(fields[i])
            i += 1
            for _ in range(ptr_cnt):
                symbol, target, pos, _src = fields[i:i + 4]
                i += 4
                if pos == "n" and symbol in ("@", "@i"):
                    parents[offset].append(target)
    return lemmas, parents


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dict_dir", help="directory holding data.noun and index.noun")
    ap.add_argument("out_dir")
    args = ap.parse_args()

    senses = read_index(os.path.join(args.dict_dir, "index.noun"))
    lemmas, parents = read_data(os.path.join(args.dict_dir, "data.noun"))

    names = {}
    for offset, lemma in lemmas.items():
        key = lemma.lower()
        names[offset] = "%s.n.%02d" % (key, senses[key].index(offset) + 1)
    if len(set(names.values())) != len(names):
        sys.exit("synset names are not unique")

    os.makedirs(args.out_dir, exist_ok=True)
    edge_count = 0
    with open(os.path.join(args.out_dir, "noun_edges.tsv"), "w", encoding="utf-8") as out:
        out.write("# WordNet 3.0 noun hypernym + instance-hypernym edges: child<TAB>parent\n")
        for offset in sorted(lemmas, key=lambda o: names[o]):
            for parent in sorted(set(parents[offset]), key=lambda o: names[o]):
                out.write("%s\t%s\n" % (names[offset], names[parent]))
                edge_count += 1
    with open(os.path.join(args.out_dir, "synset_map.tsv"), "w", encoding="utf-8") as out:
        out.write("# WordNet 3.0 noun lemmas: word<TAB>comma-separated synsets in sense order\n")
        for lemma in sorted(senses):
            out.write("%s\t%s\n" % (lemma, ",".join(names[o] for o in senses[lemma])))
    print("synsets=%d edges=%d lemmas=%d" % (len(lemmas), edge_count, len(senses)))


if __name__ == "__main__":
    main()
