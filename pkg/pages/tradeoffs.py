"""
Trade-offs Page - Array size studies and the mode comparison table
"""

import streamlit as st

from components.tables import render_styled_table
from data.data_loader import load_report
from utils.visualization import adc_chart, array_size_chart, comparison_chart


def render(out_dir):
    st.title("⚖️ Trade-offs")

    study = load_report('array_size', out_dir)
    adc = load_report('adc_tradeoff', out_dir)
    if study is None and adc is None:
        st.info("Run a command with --emit-plot-data to produce the array-size studies.")
    if study is not None:
        st.plotly_chart(array_size_chart(study), use_container_width=True)
    if adc is not None:
        st.plotly_chart(adc_chart(adc), use_container_width=True)

    table = load_report('comparison', out_dir)
    if table is None:
        st.info("No comparison.csv; run the compare command.")
        return
    st.markdown("---")
    metric = st.selectbox("Metric", ['speedup', 'energy_efficiency', 'area_efficiency',
                                     'spatial_mean', 'temporal_mean'])
    st.plotly_chart(comparison_chart(table, metric), use_container_width=True)
    render_styled_table(table, title="Mode comparison", color_column=metric)
