"""Command-line front door: gen, schema, etl, cube, mv, query, report, snapshot,
serve.

Exit codes: 0 success, 1 validation/data error, 2 usage error, 3 I/O or
corruption. Every command is deterministic given its inputs.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path

import click

from . import __version__
from .cube import GroupBySpec, lattice
from .datagen import GenSpec, generate
from .engine import Engine
from .errors import PipelineError, SnapshotError, SourceError, StarcubeError
from .etl.pipeline import parse_pipeline_config
from .query import query_from_doc
from .reporting import ReportSpec, export, render_table
from .schema import load_schema, nssf_default_schema, serialize_schema, validate
from .snapshot import load_snapshot, save_snapshot, snapshot_info
from .server import DEFAULT_PORT, serve

EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (SnapshotError, SourceError, OSError)):
        return EXIT_IO
    if isinstance(exc, PipelineError) and isinstance(exc.__cause__, (SourceError, OSError)):
        return EXIT_IO
    return EXIT_DATA


def guarded(fn):
    """Map engine exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BrokenPipeError:
            sys.exit(0)
        except StarcubeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


@click.group()
@click.version_option(__version__)
@click.option("--warehouse", "-w", type=click.Path(), default="warehouse",
              show_default=True, help="Warehouse directory.")
@click.option("--config", "-c", "config_file", type=click.Path(),
              help="Pipeline/engine config; used by etl when its --config is omitted.")
@click.option("--format", "-f", "fmt", type=click.Choice(["text", "csv", "json-doc"]),
              default="text", show_default=True, help="Output format for grids.")
@click.pass_context
def main(ctx, warehouse, config_file, fmt):
    """Star-schema warehouse engine: ETL, cubes, materialized views, OLAP queries."""
    ctx.ensure_object(dict)
    ctx.obj["warehouse"] = Path(warehouse)
    ctx.obj["config"] = Path(config_file) if config_file else None
    ctx.obj["format"] = fmt


def _engine(ctx) -> Engine:
    return Engine.open(ctx.obj["warehouse"])


# -- gen ------------------------------------------------------------------------


@main.command()
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--facts", type=int, default=10_000, show_default=True)
@click.option("--offices", type=int, default=41, show_default=True)
@click.option("--governorates", type=int, default=24, show_default=True)
@click.option("--regimes", type=int, default=6, show_default=True)
@click.option("--prestations", type=int, default=8, show_default=True)
@click.option("--payments", type=int, default=4, show_default=True)
@click.option("--insured", type=int, default=1_000, show_default=True)
@click.option("--start-day", default="2008-01-01", show_default=True)
@click.option("--end-day", default="2009-12-31", show_default=True)
@click.option("--dirty", is_flag=True, help="Inject conflicts and reject-worthy rows.")
@guarded
def gen(out, seed, facts, offices, governorates, regimes, prestations, payments,
        insured, start_day, end_day, dirty):
    """Generate deterministic synthetic sources + pipeline config + manifest."""
    spec = GenSpec(seed=seed, facts=facts, offices=offices, governorates=governorates,
                   regimes=regimes, prestations=prestations, payments=payments,
                   insured=insured, start_day=start_day, end_day=end_day, dirty=dirty)
    manifest = generate(spec, out)
    click.echo(f"generated {manifest['facts']} facts across {manifest['offices']} offices "
               f"into {out}")


# -- schema ----------------------------------------------------------------------


@main.group()
def schema():
    """Schema document tools."""


@schema.command("validate")
@click.option("--schema", "schema_file", type=click.Path(exists=False),
              help="Schema document (default: built-in).")
@guarded
def schema_validate(schema_file):
    """Parse + validate a schema document; list every violation."""
    if schema_file:
        path = Path(schema_file)
        if not path.exists():
            click.echo(f"error: no such file {path}", err=True)
            sys.exit(EXIT_IO)
        parsed = load_schema(path.read_text(encoding="utf-8"))
    else:
        parsed = nssf_default_schema()
    violations = validate(parsed)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}")
        sys.exit(EXIT_DATA)
    click.echo(f"ok: {len(parsed.dimensions)} dimensions, "
               f"{sum(len(d.levels) for d in parsed.dimensions)} levels")


@schema.command("show")
@click.pass_context
@guarded
def schema_show(ctx):
    """Print the warehouse's schema document."""
    engine = _engine(ctx)
    click.echo(serialize_schema(engine.schema), nl=False)


@main.command()
@click.option("--schema", "schema_file", type=click.Path(),
              help="Schema document (default: built-in).")
@click.pass_context
@guarded
def init(ctx, schema_file):
    """Create a warehouse directory."""
    if schema_file:
        parsed = load_schema(Path(schema_file).read_text(encoding="utf-8"))
    else:
        parsed = nssf_default_schema()
    Engine.create(ctx.obj["warehouse"], parsed)
    click.echo(f"initialized warehouse at {ctx.obj['warehouse']}")


# -- etl ------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True),
              help="Pipeline config (falls back to the global --config).")
@click.pass_context
@guarded
def etl(ctx, config_file):
    """Run a pipeline config against the warehouse (creates it if missing)."""
    path = Path(config_file) if config_file else ctx.obj.get("config")
    if path is None:
        click.echo("error: no pipeline config given (use --config)", err=True)
        sys.exit(EXIT_USAGE)
    if not path.exists():
        click.echo(f"error: config not found: {path}", err=True)
        sys.exit(EXIT_IO)
    config = parse_pipeline_config(path.read_text(encoding="utf-8"), path.parent)
    engine = Engine.open_or_create(ctx.obj["warehouse"])
    report = engine.run_etl(config)
    if ctx.obj["format"] == "json-doc":
        click.echo(json.dumps(report.to_doc(), indent=2))
    else:
        click.echo(report.render())
    if not report.reconciles():
        click.echo("error: report does not reconcile", err=True)
        sys.exit(EXIT_DATA)


# -- cube -----------------------------------------------------------------------


@main.group()
def cube():
    """Cuboid materialization over the group-by lattice."""


@cube.command("build")
@click.option("--spec", "spec_text", default="all", show_default=True,
              help='"all" for the full lattice, or specs like '
                   '"office:governorate|prestation:prestation" (comma-separated).')
@click.pass_context
@guarded
def cube_build(ctx, spec_text):
    engine = _engine(ctx)
    if spec_text.strip() == "all":
        n = engine.build_cubes("full")
    else:
        specs = [GroupBySpec.parse(engine.schema, part) for part in spec_text.split(",")]
        n = engine.build_cubes(specs)
    click.echo(f"built {n} cuboid(s) at epoch {engine.view().epoch}")


@cube.command("list")
@click.pass_context
@guarded
def cube_list(ctx):
    engine = _engine(ctx)
    if not engine.cubes:
        click.echo("no cuboids built")
        return
    for spec, cuboid in engine.cubes.items():
        click.echo(f"{spec.label(engine.schema)}  cells={cuboid.n_cells}  epoch={cuboid.epoch}")


@cube.command("export")
@click.option("--spec", "spec_text", required=True)
@click.option("--out", type=click.Path(), help="Output file (default: stdout).")
@click.pass_context
@guarded
def cube_export(ctx, spec_text, out):
    """Dump one cuboid as delimited text: member labels, sum, count."""
    engine = _engine(ctx)
    spec = GroupBySpec.parse(engine.schema, spec_text)
    cuboid = engine.cubes.get(spec)
    if cuboid is None:
        click.echo(f"error: cuboid {spec.label(engine.schema)} not built", err=True)
        sys.exit(EXIT_DATA)
    cells = []
    for i in range(cuboid.n_cells):
        labels = [idx.labels[int(c[i])] for idx, c in zip(cuboid.indexes, cuboid.coords)]
        cells.append((labels, int(cuboid.sums[i]), int(cuboid.counts[i])))
    cells.sort(key=lambda t: t[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"{d}.{l}" for d, l in zip(cuboid.dims, cuboid.levels)]
                    + ["sum", "count"])
    for labels, total, n in cells:
        writer.writerow(labels + [total, n])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(cells)} cells to {out}")
    else:
        click.echo(text, nl=False)


# -- mv -------------------------------------------------------------------------


@main.group()
def mv():
    """Materialized views."""


@mv.command("list")
@click.pass_context
@guarded
def mv_list(ctx):
    engine = _engine(ctx)
    rows = engine.mviews.describe(engine.view().epoch)
    if not rows:
        click.echo("no views defined")
        return
    for r in rows:
        grouping = ",".join(f"{d}:{l}" for d, l in r["group_by"].items())
        stale = "stale" if r["stale"] else "fresh"
        click.echo(
            f"{r['name']}  [{grouping}]  epoch={r['built_epoch']}  {stale}  "
            f"cells={r['cells']}  rewrite={'on' if r['rewrite_enabled'] else 'off'}"
        )


@mv.command("refresh")
@click.argument("names", nargs=-1)
@click.option("--all", "refresh_all", is_flag=True, help="Refresh every stale view.")
@click.pass_context
@guarded
def mv_refresh(ctx, names, refresh_all):
    engine = _engine(ctx)
    if not names and not refresh_all:
        click.echo("error: give view names or --all", err=True)
        sys.exit(EXIT_USAGE)
    if refresh_all:
        n = engine.refresh_views(only_stale=True)
    else:
        n = engine.refresh_views(names=list(names), only_stale=False)
    click.echo(f"{n} refreshed")


# -- query / report ----------------------------------------------------------------


def _parse_filters(schema, filter_opts) -> list[dict]:
    clauses = []
    for text in filter_opts:
        if "=" not in text:
            raise click.UsageError(f"bad --filter {text!r} (want level=member|member)")
        lhs, rhs = text.split("=", 1)
        lhs = lhs.strip()
        if "." in lhs:
            dim_name, level = lhs.split(".", 1)
        else:
            dim_name, level = schema.find_level(lhs)
        members = [m.strip() for m in rhs.split("|") if m.strip()]
        clauses.append({"dimension": dim_name, "level": level, "members": members})
    return clauses


def _build_query_doc(engine, query_file, group_by, filter_opts, measure, time_range,
                     sort, limit) -> dict:
    if query_file:
        doc = json.loads(Path(query_file).read_text(encoding="utf-8"))
        return doc.get("query", doc)
    doc: dict = {}
    if group_by:
        mapping = {}
        for part in group_by.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                dim_name, level = part.split(":", 1)
            else:
                dim_name, level = engine.schema.find_level(part)
            mapping[dim_name] = level
        doc["group_by"] = mapping
    if filter_opts:
        doc["filters"] = _parse_filters(engine.schema, filter_opts)
    if measure:
        doc["measures"] = []
        for part in measure.split(","):
            agg, _, name = part.partition(":")
            doc["measures"].append({"aggregator": agg, "measure": name or "montant"})
    if time_range:
        lo, _, hi = time_range.partition(":")
        doc["time_range"] = {"from": lo, "to": hi}
    if sort:
        column, _, direction = sort.partition(":")
        doc["sort"] = {"column": column, "direction": direction or "asc"}
    if limit:
        doc["limit"] = limit
    return doc


def _emit_grid(ctx_obj, grid, report_spec=None):
    fmt = ctx_obj["format"]
    if fmt == "csv":
        sys.stdout.write(export(grid, "delimited").decode("utf-8"))
    elif fmt == "json-doc":
        sys.stdout.write(export(grid, "structured").decode("utf-8") + "\n")
    else:
        for line in render_table(grid, report_spec):
            click.echo(line)
        click.echo(
            f"-- plan: {grid.plan.kind}({grid.plan.detail}) "
            f"input_rows={grid.plan.input_rows} elapsed={grid.plan.elapsed_ms:.2f}ms "
            f"epoch={grid.epoch}"
        )


_query_options = [
    click.option("--query", "query_file", type=click.Path(exists=True),
                 help="Query document (JSON)."),
    click.option("--group-by", "group_by", default="",
                 help="Comma-separated levels, e.g. governorate,prestation."),
    click.option("--filter", "filter_opts", multiple=True,
                 help="level=member|member (repeatable)."),
    click.option("--measure", default="", help="e.g. sum:montant,count:montant."),
    click.option("--time-range", default="", help="from:to (ISO days, inclusive)."),
    click.option("--sort", default="", help="column[:asc|desc]."),
    click.option("--limit", type=int, default=0),
]


def query_options(fn):
    for opt in reversed(_query_options):
        fn = opt(fn)
    return fn


@main.command()
@query_options
@click.option("--force-plan", type=click.Choice(["mview", "cuboid", "scan"]))
@click.pass_context
@guarded
def query(ctx, query_file, group_by, filter_opts, measure, time_range, sort, limit,
          force_plan):
    """Run an aggregate query and print the grid."""
    engine = _engine(ctx)
    doc = _build_query_doc(engine, query_file, group_by, filter_opts, measure,
                           time_range, sort, limit)
    q = query_from_doc(engine.schema, doc)
    grid = engine.execute(q, force=force_plan)
    _emit_grid(ctx.obj, grid)


@main.command()
@query_options
@click.option("--rows", "row_axes", default="", help="Row-axis dimensions (ordered).")
@click.option("--cols", "col_axes", default="", help="Column-axis dimensions (crosstab).")
@click.option("--totals", is_flag=True)
@click.option("--thousands", is_flag=True, help="Thousands separators.")
@click.option("--dinar", is_flag=True, help="Display amounts in dinars (/1000).")
@click.pass_context
@guarded
def report(ctx, query_file, group_by, filter_opts, measure, time_range, sort, limit,
           row_axes, col_axes, totals, thousands, dinar):
    """Run a query and render it as a grouped report table."""
    engine = _engine(ctx)
    doc = _build_query_doc(engine, query_file, group_by, filter_opts, measure,
                           time_range, sort, limit)
    q = query_from_doc(engine.schema, doc)
    grid = engine.execute(q)
    spec = ReportSpec(
        row_axes=tuple(s.strip() for s in row_axes.split(",") if s.strip()),
        column_axes=tuple(s.strip() for s in col_axes.split(",") if s.strip()),
        totals=totals,
        thousands=thousands,
        dinar=dinar,
    )
    _emit_grid(ctx.obj, grid, spec)


# -- snapshot ----------------------------------------------------------------------


@main.group()
def snapshot():
    """Snapshot administration."""


@snapshot.command("save")
@click.option("--out", type=click.Path(), required=True)
@click.pass_context
@guarded
def snapshot_save(ctx, out):
    engine = _engine(ctx)
    save_snapshot(out, engine.store, engine.mviews, engine.cubes)
    click.echo(f"saved snapshot to {out}")


@snapshot.command("load")
@click.option("--in", "in_file", type=click.Path(exists=True), required=True)
@click.pass_context
@guarded
def snapshot_load(ctx, in_file):
    engine = _engine(ctx)
    store, mviews, cubes = load_snapshot(in_file, engine.schema)
    engine._adopt(store, mviews, cubes)
    engine.save()
    click.echo(f"loaded snapshot from {in_file} (epoch {store.epoch})")


@snapshot.command("verify")
@click.option("--file", "snap_file", type=click.Path(), help="Default: warehouse snapshot.")
@click.pass_context
@guarded
def snapshot_verify(ctx, snap_file):
    path = Path(snap_file) if snap_file else ctx.obj["warehouse"] / "warehouse.snap"
    info = snapshot_info(path)
    click.echo(f"ok: {info['bytes']} bytes, epoch {info['epoch']}, "
               f"{len(info['sections'])} sections")


@snapshot.command("info")
@click.option("--file", "snap_file", type=click.Path(), help="Default: warehouse snapshot.")
@click.pass_context
@guarded
def snapshot_info_cmd(ctx, snap_file):
    path = Path(snap_file) if snap_file else ctx.obj["warehouse"] / "warehouse.snap"
    info = snapshot_info(path)
    click.echo(json.dumps(info, indent=2))


# -- serve -------------------------------------------------------------------------


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=DEFAULT_PORT, show_default=True)
@click.pass_context
@guarded
def serve_cmd(ctx, host, port):
    """Serve the HTTP API (loopback by default)."""
    engine = _engine(ctx)
    click.echo(f"serving warehouse {ctx.obj['warehouse']} on http://{host}:{port}")
    serve(engine, host=host, port=port)


if __name__ == "__main__":
    main()
