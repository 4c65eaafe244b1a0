#!/usr/bin/env python3
# Copyright 2026 The CDR Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Convert the public Mafengwo group-recommendation files into cdr edge lists.

Input directory layout (as distributed):
  groupMember.txt                      group<TAB or space>u1,u2,...
  groupRatingTrain.txt / ...Test.txt   group item [rating]
  userRatingTrain.txt  / ...Test.txt   user item [rating]

Train and test ratings are merged, since splitting is done by cdr itself.
Output: tuple_object.tsv, member_object.tsv, tuple_member.tsv with a shared
"#counts" record so all three files agree on universe sizes.
"""

import argparse
import re
from pathlib import Path


def read_pairs(paths):
    edges = set()
    for path in paths:
        if not path.exists():
            continue
        for line in path.read_text().splitlines():
            fields = re.split(r"[\s,]+", line.strip())
            if len(fields) >= 2 and fields[0].isdigit() and fields[1].isdigit():
                edges.add((int(fields[0]), int(fields[1])))
    return edges


def read_members(path):
    edges = set()
    for line in path.read_text().splitlines():
        fields = re.split(r"[\s,]+", line.strip())
        if len(fields) >= 2:
            group = int(fields[0])
            edges.update((group, int(u)) for u in fields[1:] if u)
    return edges


def write(path, edges, counts):
    with path.open("w") as out:
        out.write("#counts {} {} {}\n".format(*counts))
        for src, dst in sorted(edges):
            out.write(f"{src}\t{dst}\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", type=Path)
    parser.add_argument("dest", type=Path)
    args = parser.parse_args()

    src = args.source
    y = read_pairs([src / "groupRatingTrain.txt", src / "groupRatingTest.txt"])
    x = read_pairs([src / "userRatingTrain.txt", src / "userRatingTest.txt"])
    z = read_members(src / "groupMember.txt")
    if not y or not x or not z:
        raise SystemExit(f"missing or empty input files under {src}")

    tuples = 1 + max(max(g for g, _ in y), max(g for g, _ in z))
    members = 1 + max(max(u for u, _ in x), max(u for _, u in z))
    objects = 1 + max(max(i for _, i in y), max(i for _, i in x))
    counts = (tuples, members, objects)

    args.dest.mkdir(parents=True, exist_ok=True)
    write(args.dest / "tuple_object.tsv", y, counts)
    write(args.dest / "member_object.tsv", x, counts)
    write(args.dest / "tuple_member.tsv", z, counts)
    print(f"{tuples} tuples, {members} members, {objects} objects; "
          f"{len(y)} tuple-object, {len(x)} member-object, {len(z)} affiliation edges")


if __name__ == "__main__":
    main()
