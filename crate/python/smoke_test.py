"""Smoke test for the catrec Python bindings."""

import json

import catrec


def main():
    g, y = catrec.gen_random_tree(60, 4, seed=1)
    assert g.is_tree() and g.n == 60 and g.m == 59
    z, x = catrec.apply_noise(g, y, 4, p=0.0, q=0.0, seed=2)
    assert z == y and catrec.edge_disagreement(g, y, x, 4) == 0
    budget = catrec.edge_budget(g.n, 0.1)
    sol = catrec.solve_tree(g, x, z, 4, budget["effective_budget"])
    assert sol["labels"] == y and sol["objective"] == 0

    grid, truth = catrec.gen_grid(8, 8, 4, seed=3)
    td = catrec.decompose(grid)
    assert td["valid"] and td["stats"]["wid"] >= 2
    z, x = catrec.apply_noise(grid, truth, 4, p=0.05, q=0.1, seed=4)
    rep = catrec.recover_graph(grid, x, z, 4, p=0.05, truth=truth)
    assert len(rep["labels"]) == grid.n
    copy_z = catrec.hamming(z, truth, 4) / grid.n
    majority = catrec.hamming(catrec.majority_vote(grid, x, z, 4), truth, 4) / grid.n
    bp = catrec.hamming(catrec.loopy_bp(grid, x, z, 0.05, 0.1, 4), truth, 4) / grid.n

    tree_bound = catrec.tree_bound(101, 2, 0.1, 0.2)
    assert tree_bound["value"] > 0
    try:
        catrec.tree_bound(10, 3, 0.1, 0.8)
    except ValueError as e:
        assert "regime" in str(e)
    else:
        raise AssertionError("expected a regime error")
    assert abs(catrec.separation_constant(3, 0.3) - 0.55) < 1e-12

    cfg = {"experiment": "sweep-k", "source": {"type": "random-tree", "n_min": 20, "n_max": 30},
           "k": [2, 3], "p": [0.1], "q": [0.2], "trials": 3, "base_seed": 5}
    records, summary = catrec.run_experiment(json.dumps(cfg))
    again, _ = catrec.run_experiment(json.dumps(cfg))
    assert records == again and len(summary) == 2 * 3

    print(json.dumps({"grid_ours": rep["normalized"], "copy_z": copy_z, "majority": majority, "lbp": bp,
                      "tree_bound": tree_bound["value"], "records": len(records)}))
    print("smoke test passed")


if __name__ == "__main__":
    main()
