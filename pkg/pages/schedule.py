"""
Schedule Page - Temporal utilization and per-IMA timelines from a trace
"""

import streamlit as st

from components.tables import render_data_table
from data.data_loader import load_report
from utils.visualization import activity_chart, timeline_chart


def render(out_dir):
    st.title("⏱️ Schedule")

    trace = load_report('trace', out_dir)
    spatial = load_report('spatial', out_dir)
    if trace is None:
        st.info("No trace.csv in this directory.")
        return

    cells = int(spatial['allocated_cells'].sum()) if spatial is not None and not spatial.empty else 0
    st.plotly_chart(activity_chart(trace, cells), use_container_width=True)

    imas = sorted(int(i) for i in trace['ima'].unique() if i >= 0)
    if imas:
        ima = st.selectbox("IMA", imas)
        st.plotly_chart(timeline_chart(trace, ima), use_container_width=True)

    cycles = load_report('cycles', out_dir)
    if cycles is not None and not cycles.empty:
        st.metric("Overlap fraction", f"{cycles['overlap_fraction'].iloc[0] * 100:.1f}%",
                  help="Busy cycles in which two or more FBs are active")
        render_data_table(cycles.drop(columns=['overlap_fraction']), title="Per-FB cycles")
