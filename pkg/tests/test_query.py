import pytest

from starcube.cube import GroupBySpec
from starcube.errors import NavigationError, QueryError
from starcube.query import (
    NavState,
    dice,
    drill_down,
    execute,
    pivot,
    plan_query,
    query_from_doc,
    roll_up,
    slice_member,
)
from starcube.store import FilterClause

from figure3_data import FIGURE3_ROWS
from oracles import brute_force_cells


def _grid_cells(grid):
    return {r.labels: r.values for r in grid.rows}


def _q(schema, doc):
    return query_from_doc(schema, doc)


class TestQueryDocument:
    def test_defaults_to_sum_of_first_measure(self, figure3_engine):
        q = _q(figure3_engine.schema, {})
        assert q.measures == (("sum", "montant"),)

    def test_unknown_level_names_field(self, figure3_engine):
        with pytest.raises(QueryError) as err:
            _q(figure3_engine.schema, {"group_by": {"office": "region"}})
        assert err.value.field == "group_by"

    def test_unknown_dimension(self, figure3_engine):
        with pytest.raises(QueryError) as err:
            _q(figure3_engine.schema, {"group_by": {"agency": "office"}})
        assert err.value.field == "group_by"

    def test_empty_members_rejected(self, figure3_engine):
        with pytest.raises(QueryError) as err:
            _q(figure3_engine.schema, {"filters": [
                {"dimension": "office", "level": "office", "members": []}
            ]})
        assert err.value.field == "filters[0]"

    def test_unknown_measure(self, figure3_engine):
        with pytest.raises(QueryError) as err:
            _q(figure3_engine.schema,
               {"measures": [{"aggregator": "sum", "measure": "chiffre"}]})
        assert err.value.field == "measures"

    def test_group_by_normalized_to_schema_order(self, figure3_engine):
        a = _q(figure3_engine.schema,
               {"group_by": {"prestation": "prestation", "office": "governorate"}})
        b = _q(figure3_engine.schema,
               {"group_by": {"office": "governorate", "prestation": "prestation"}})
        assert a == b

    def test_round_trip_through_doc(self, figure3_engine):
        doc = {
            "measures": [{"aggregator": "sum", "measure": "montant"}],
            "group_by": {"office": "governorate"},
            "filters": [{"dimension": "prestation", "level": "prestation",
                         "members": ["66"]}],
            "time_range": {"from": "2009-01-01", "to": "2009-12-31"},
            "limit": 10,
        }
        q = _q(figure3_engine.schema, doc)
        assert _q(figure3_engine.schema, q.to_doc()) == q


class TestExecute:
    def test_figure3_rows(self, figure3_engine):
        grid = figure3_engine.execute(_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate", "prestation": "prestation"}},
        ))
        cells = _grid_cells(grid)
        assert len(cells) == 33
        for gov, code, amount in FIGURE3_ROWS:
            assert cells[(gov, code)] == (amount,)

    def test_grand_total_row(self, figure3_engine):
        grid = figure3_engine.execute(_q(figure3_engine.schema, {}))
        expected = sum(amount for _, _, amount in FIGURE3_ROWS)
        assert len(grid.rows) == 1
        assert grid.rows[0].values == (expected,)
        assert grid.rows[0].labels == ()

    def test_empty_result(self, figure3_engine):
        grid = figure3_engine.execute(_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate"},
             "time_range": {"from": "1990-01-01", "to": "1990-12-31"}},
        ))
        assert grid.rows == ()

    def test_plan_independence_on_views(self, figure3_engine):
        doc = {"group_by": {"regime": "regime"},
               "measures": [{"aggregator": "sum", "measure": "montant"},
                            {"aggregator": "count", "measure": "montant"},
                            {"aggregator": "average", "measure": "montant"}]}
        q = _q(figure3_engine.schema, doc)
        via_view = figure3_engine.execute(q, force="mview")
        via_scan = figure3_engine.execute(q, force="scan")
        assert _grid_cells(via_view) == _grid_cells(via_scan)
        assert via_view.plan.kind == "mview"
        assert via_scan.plan.kind == "scan"

    def test_filtered_query_matches_brute_force(self, figure3_engine):
        q = _q(figure3_engine.schema, {
            "group_by": {"prestation": "prestation"},
            "filters": [{"dimension": "office", "level": "governorate",
                         "members": ["ARIANA", "BEJA"]}],
        })
        grid = figure3_engine.execute(q)
        oracle = brute_force_cells(
            figure3_engine.view(),
            GroupBySpec.from_levels(figure3_engine.schema, {"prestation": "prestation"}),
            clauses=[("office", "governorate", {"ARIANA", "BEJA"})],
        )
        assert {(r.keys[0],): (r.values[0], ) for r in grid.rows} == \
            {k: (v[0],) for k, v in oracle.items()}

    def test_sort_and_limit(self, figure3_engine):
        q = _q(figure3_engine.schema, {
            "group_by": {"office": "governorate", "prestation": "prestation"},
            "sort": {"column": "sum(montant)", "direction": "desc"},
            "limit": 3,
        })
        grid = figure3_engine.execute(q)
        values = [r.values[0] for r in grid.rows]
        assert values == sorted(values, reverse=True)[:3]
        assert values[0] == 25839668164

    def test_default_sort_is_label_ascending(self, figure3_engine):
        grid = figure3_engine.execute(_q(
            figure3_engine.schema, {"group_by": {"office": "governorate"}}
        ))
        labels = [r.labels[0] for r in grid.rows]
        assert labels == sorted(labels)

    def test_average_is_sum_over_count(self, figure3_engine):
        q = _q(figure3_engine.schema, {
            "group_by": {"office": "governorate"},
            "measures": [{"aggregator": "sum", "measure": "montant"},
                         {"aggregator": "count", "measure": "montant"},
                         {"aggregator": "average", "measure": "montant"}],
        })
        for row in figure3_engine.execute(q).rows:
            s, c, avg = row.values
            assert avg == s / c

    def test_grand_total_consistency(self, figure3_engine):
        fine = figure3_engine.execute(_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate", "prestation": "prestation"}},
        ))
        coarse = figure3_engine.execute(_q(
            figure3_engine.schema, {"group_by": {"prestation": "prestation"}},
        ))
        per_prestation = {}
        for row in fine.rows:
            code = row.labels[1]
            per_prestation[code] = per_prestation.get(code, 0) + row.values[0]
        assert per_prestation == {r.labels[0]: r.values[0] for r in coarse.rows}


class TestPlanner:
    def test_preference_mview_then_cuboid_then_scan(self, figure3_engine):
        q = _q(figure3_engine.schema, {"group_by": {"regime": "regime"}})
        assert plan_query(figure3_engine, q).kind == "mview"
        q2 = _q(figure3_engine.schema, {"group_by": {"payment": "payment"}})
        assert plan_query(figure3_engine, q2).kind == "scan"

    def test_estimated_rows_upper_bounds_result(self, figure3_engine):
        q = _q(figure3_engine.schema, {"group_by": {"office": "governorate"}})
        plan = plan_query(figure3_engine, q)
        grid = figure3_engine.execute(q)
        assert plan.estimated_rows >= len(grid.rows)

    def test_forced_plan_not_admissible_raises(self, figure3_engine):
        q = _q(figure3_engine.schema, {"group_by": {"payment": "payment"}})
        with pytest.raises(QueryError):
            figure3_engine.execute(q, force="mview")


class TestNavigation:
    @pytest.fixture
    def state(self, figure3_engine):
        return NavState(query=_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate", "time": "month"}},
        ))

    def test_roll_up_time(self, figure3_engine, state):
        out = roll_up(state, figure3_engine.schema, "time")
        assert out.query.level_of("time") == "quarter"
        assert out.history[-1] == state.query

    def test_roll_up_office_to_all(self, figure3_engine, state):
        out = roll_up(state, figure3_engine.schema, "office")
        assert out.query.level_of("office") is None

    def test_roll_up_past_all_errors(self, figure3_engine, state):
        with pytest.raises(NavigationError):
            roll_up(state, figure3_engine.schema, "payment")

    def test_drill_down_from_all(self, figure3_engine, state):
        out = drill_down(state, figure3_engine.schema, "prestation")
        assert out.query.level_of("prestation") == "prestation"

    def test_drill_below_finest_errors(self, figure3_engine):
        state = NavState(query=_q(figure3_engine.schema, {"group_by": {"time": "day"}}))
        with pytest.raises(NavigationError):
            drill_down(state, figure3_engine.schema, "time")

    def test_anchored_drill(self, figure3_engine):
        state = NavState(query=_q(figure3_engine.schema, {"group_by": {"time": "year"}}))
        out = drill_down(state, figure3_engine.schema, "time", anchor="2009",
                         view=figure3_engine.view())
        assert out.query.level_of("time") == "quarter"
        assert FilterClause("time", "year", frozenset(["2009"])) in out.query.filters

    def test_anchor_must_be_member(self, figure3_engine):
        state = NavState(query=_q(figure3_engine.schema, {"group_by": {"time": "year"}}))
        with pytest.raises(NavigationError):
            drill_down(state, figure3_engine.schema, "time", anchor="1917",
                       view=figure3_engine.view())

    def test_navigation_inverse(self, figure3_engine, state):
        rolled = roll_up(state, figure3_engine.schema, "time")
        back = drill_down(rolled, figure3_engine.schema, "time")
        assert back.query.group_by == state.query.group_by

    def test_back_restores_exactly(self, figure3_engine, state):
        out = roll_up(state, figure3_engine.schema, "time")
        assert out.back().query == state.query

    def test_slice_persists_through_rollup(self, figure3_engine, state):
        sliced = slice_member(state, figure3_engine.schema, "office", "governorate",
                              "ARIANA", view=figure3_engine.view())
        rolled = roll_up(sliced, figure3_engine.schema, "time")
        assert FilterClause("office", "governorate", frozenset(["ARIANA"])) \
            in rolled.query.filters

    def test_slice_rollup_commutes(self, figure3_engine, state):
        a = roll_up(
            slice_member(state, figure3_engine.schema, "office", "governorate", "ARIANA"),
            figure3_engine.schema, "time",
        )
        b = slice_member(
            roll_up(state, figure3_engine.schema, "time"),
            figure3_engine.schema, "office", "governorate", "ARIANA",
        )
        assert a.query == b.query
        grid_a = figure3_engine.execute(a.query)
        grid_b = figure3_engine.execute(b.query)
        assert _grid_cells(grid_a) == _grid_cells(grid_b)

    def test_two_disjoint_slices_empty_downstream(self, figure3_engine, state):
        s1 = slice_member(state, figure3_engine.schema, "office", "governorate", "ARIANA")
        s2 = slice_member(s1, figure3_engine.schema, "office", "governorate", "BEJA")
        grid = figure3_engine.execute(s2.query)
        assert grid.rows == ()

    def test_dice_matches_filtered_brute_force(self, figure3_engine):
        state = NavState(query=_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate", "prestation": "prestation"}},
        ))
        diced = dice(state, figure3_engine.schema, [
            FilterClause("office", "governorate", frozenset(["ARIANA", "BEJA"])),
            FilterClause("prestation", "prestation", frozenset(["66", "68"])),
        ], view=figure3_engine.view())
        grid = figure3_engine.execute(diced.query)
        oracle = brute_force_cells(
            figure3_engine.view(),
            diced.query.spec(figure3_engine.schema),
            clauses=[("office", "governorate", {"ARIANA", "BEJA"}),
                     ("prestation", "prestation", {"66", "68"})],
        )
        assert {r.keys: (r.values[0],) for r in grid.rows} == \
            {k: (v[0],) for k, v in oracle.items()}

    def test_dice_empty_clause_list_only_grows_history(self, figure3_engine, state):
        out = dice(state, figure3_engine.schema, [])
        assert out.query == state.query
        assert len(out.history) == len(state.history) + 1

    def test_dice_slice_order_independent(self, figure3_engine, state):
        clause = FilterClause("prestation", "prestation", frozenset(["66", "68"]))
        a = slice_member(
            dice(state, figure3_engine.schema, [clause]),
            figure3_engine.schema, "office", "governorate", "ARIANA",
        )
        b = dice(
            slice_member(state, figure3_engine.schema, "office", "governorate", "ARIANA"),
            figure3_engine.schema, [clause],
        )
        assert a.query == b.query


class TestPivot:
    @pytest.fixture
    def grid(self, figure3_engine):
        return figure3_engine.execute(_q(
            figure3_engine.schema,
            {"group_by": {"office": "governorate", "prestation": "prestation"}},
        ))

    def test_swap_axes_preserves_cells(self, grid):
        swapped = pivot(grid, [1, 0])
        assert swapped.axes == (grid.axes[1], grid.axes[0])
        original = {(r.labels[0], r.labels[1]): r.values for r in grid.rows}
        flipped = {(r.labels[1], r.labels[0]): r.values for r in swapped.rows}
        assert original == flipped

    def test_identity_is_identity(self, grid):
        assert pivot(grid, [0, 1]) is grid

    def test_double_pivot_restores(self, grid):
        assert pivot(pivot(grid, [1, 0]), [1, 0]) == grid

    def test_invalid_permutation(self, grid):
        with pytest.raises(QueryError):
            pivot(grid, [0, 0])
