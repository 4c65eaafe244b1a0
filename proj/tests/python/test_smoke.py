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
import numpy as np
import pytest

import cdr


def toy_graph():
    # t0 = {m0, m1}, t1 = {m1, m2}; members like objects; tuples interacted with o0/o1.
    tuple_object = np.array([[0, 0], [0, 1], [1, 1]])
    member_object = np.array([[0, 0], [1, 1], [2, 1], [3, 0]])
    tuple_member = np.array([[0, 0], [0, 1], [1, 1], [1, 2]])
    return cdr.Graph.from_edges(tuple_object, member_object, tuple_member)


def test_graph_counts_and_edges():
    g = toy_graph()
    assert (g.counts.tuples, g.counts.members, g.counts.objects) == (2, 4, 2)
    assert g.tuple_member.shape == (4, 2)


def test_member_metrics_values():
    # m3 reaches o0 and touches no tuple; no tuple interactions.
    g = cdr.Graph.from_edges(
        np.zeros((0, 2)), np.array([[3, 0]]), np.array([[0, 0], [0, 1], [1, 1], [1, 2]])
    )
    c, d = cdr.member_metrics(g).dense()
    assert c.shape == (3, 3)
    assert c[0, 1] == pytest.approx(0.5)
    assert d[0, 1] == pytest.approx(0.81649658)
    assert c[1, 1] == pytest.approx(1.31649658)
    assert np.all(d >= 0)
    assert np.all(np.diag(d) == 0)


def test_tuple_metrics_values():
    s = cdr.tuple_metrics(toy_graph())
    assert s.consistency(0, 3) == pytest.approx(0.5)
    assert s.discrepancy(1, 2) == pytest.approx(1.0)
    assert s.positive_pairs().shape[1] == 2


def test_train_and_evaluate():
    g = cdr.random_graph(30, 30, 30, average_degree=3.0, seed=4)
    parts = cdr.split(g, seed=1, train=0.5, test=0.3, valid=0.1)
    train_graph = g.with_tuple_interactions(parts["train"])
    cfg = cdr.PipelineConfig()
    cfg.pretrain.dim = cfg.finetune.dim = 8
    cfg.pretrain.max_epochs = cfg.finetune.max_epochs = 3
    out = cdr.train(train_graph, "CDR", cfg, valid=parts["valid"], exclude=parts["train"])
    emb = out["embeddings"]
    assert emb.shape == (60, 16)
    assert [s["name"] for s in out["stages"]] == ["pretrain", "finetune"]
    exclude = np.vstack([parts["train"], parts["valid"]])
    report = cdr.evaluate(emb, g, parts["test"], exclude, ks=[5, 10])
    assert set(report) == {5, 10}
    for row in report.values():
        assert 0.0 <= row["recall"] <= 1.0
        assert 0.0 <= row["ndcg"] <= 1.0
    again = cdr.train(train_graph, "CDR", cfg, valid=parts["valid"], exclude=parts["train"])
    assert np.array_equal(emb, again["embeddings"])


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        cdr.train(toy_graph(), "no-such-variant")
    with pytest.raises(ValueError):
        cdr.Graph.from_edges(np.array([[0, -1]]), np.zeros((0, 2)), np.zeros((0, 2)))


def test_cli_exit_codes(tmp_path):
    code, _, err = cdr.run_cli(["train", "--tuple-object", str(tmp_path / "missing.tsv")])
    assert code == 1
    assert err
