"""
Overview Page - Headline metrics, per-layer utilization and floorplan of a run
"""

import streamlit as st

from components.metrics import render_cost_breakdown, render_kpi_cards
from components.tables import render_data_table, render_styled_table
from data.data_loader import load_report
from utils.visualization import create_bar_chart


def render(out_dir):
    st.title("📊 Run Overview")

    summary = load_report('summary', out_dir)
    if summary is None:
        st.info("No summary.json in this directory; run the simulate command first.")
        return

    st.markdown(f"**Model:** `{summary.get('model')}` · **seed** {summary.get('seed')} · "
                f"**hash** `{summary.get('model_hash', '')[:12]}`")
    render_kpi_cards(summary)
    st.markdown("---")

    spatial = load_report('spatial', out_dir)
    if spatial is not None and not spatial.empty:
        fig = create_bar_chart(spatial.assign(layer=spatial['layer_id'].astype(str)), x='layer', y='utilization',
                               title='Spatial utilization per layer', x_label='GEMM layer',
                               y_label='Mapped / allocated cells')
        st.plotly_chart(fig, use_container_width=True)
        render_styled_table(spatial, title="Per-layer usage", color_column='utilization')

    st.markdown("---")
    render_cost_breakdown(summary)

    stalls = summary.get('stalls', {})
    if stalls:
        st.caption(" · ".join(f"{k} stall: {v:,} cycles" for k, v in stalls.items()))

    render_data_table(load_report('floorplan', out_dir), title="Floorplan")
