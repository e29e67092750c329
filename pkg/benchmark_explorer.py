import marimo

__generated_with = "0.14.17"
app = marimo.App(width="medium")


@app.cell(hide_code=True)
def _(mo):
    mo.md(
        r"""
    # Exploring size-dependent impact benchmarks
    Load a company dataset, pick an impact and a size indicator, and look at the fitted power law of every group.
    Companies above their group's line emit more than expected for their size.
    """
    )
    return


@app.cell
def _(mo):
    dataset_path = mo.ui.text(value="fixtures/insurance_brokers.csv", label="Dataset", full_width=True)
    impact = mo.ui.dropdown(options=["emissions", "energy", "water", "waste"], value="emissions", label="Impact")
    size = mo.ui.dropdown(options=["employees", "marketcap", "assets", "revenue"], value="employees", label="Size")
    level = mo.ui.dropdown(options=["all", "sector", "industry"], value="industry", label="Level")
    min_group = mo.ui.slider(start=3, stop=50, value=10, label="Minimum group size")
    mo.vstack([dataset_path, mo.hstack([impact, size, level, min_group])])
    return dataset_path, impact, level, min_group, size


@app.cell
def _(dataset_path, load_datasets, pl):
    records, row_errors = load_datasets([dataset_path.value])
    pl.DataFrame([record.model_dump() for record in records])
    return records, row_errors


@app.cell(hide_code=True)
def _(mo, row_errors):
    mo.md(f"**{len(row_errors)}** rows were rejected while reading the file.")
    return


@app.cell
def _(
    GroupLevel,
    ImpactMetric,
    MetricSelector,
    SizeMetric,
    build_sample,
    fit_groups,
    impact,
    level,
    min_group,
    records,
    size,
):
    selector = MetricSelector(size_metric=SizeMetric(size.value), impact_metric=ImpactMetric(impact.value))
    sample = build_sample(records, selector, GroupLevel(level.value), min_group.value)
    grouped = fit_groups(sample)
    return grouped, sample


@app.cell
def _(grouped, pl):
    pl.DataFrame(
        [{"group": key, **fit.model_dump(mode="json")} for key, fit in grouped.fits.items()]
    )
    return


@app.cell
def _(grouped, mo):
    group_choice = mo.ui.dropdown(options=sorted(grouped.fits), value=sorted(grouped.fits)[0], label="Group")
    group_choice
    return (group_choice,)


@app.cell
def _(SIZE_LABELS, SizeMetric, emit_scatter, group_choice, grouped, mo, records, sample, size):
    sector_of = {record.company_id: record.sector for record in records}
    bundle = emit_scatter(
        sample.groups[group_choice.value], grouped.fits[group_choice.value], group_choice.value, sector_of
    )
    mo.Html(bundle.svg(size_label=SIZE_LABELS[SizeMetric(size.value)]))
    return


@app.cell
def _(grouped, pl, sample, savings, score_companies):
    report = savings(sample, grouped)
    scores = pl.DataFrame([score.model_dump() for score in score_companies(sample, grouped)])
    print(f"Capping every company at its benchmark saves {report.savings_fraction:.1%}")
    scores.sort("residual_ln", descending=True)
    return


@app.cell
def _():
    import marimo as mo
    import polars as pl

    from corporate_scaling.benchmark import fit_groups, savings, score_companies
    from corporate_scaling.ingest import build_sample, load_datasets
    from corporate_scaling.models import GroupLevel, ImpactMetric, MetricSelector, SizeMetric
    from corporate_scaling.report import SIZE_LABELS, emit_scatter
    return (
        GroupLevel,
        ImpactMetric,
        MetricSelector,
        SIZE_LABELS,
        SizeMetric,
        build_sample,
        emit_scatter,
        fit_groups,
        load_datasets,
        mo,
        pl,
        savings,
        score_companies,
    )


if __name__ == "__main__":
    app.run()
