"""
Metrics Components - KPI cards for a simulation run
"""

import streamlit as st


def render_kpi_cards(summary):
    """
    Render the headline numbers of a simulate run

    Args:
        summary (dict): Contents of summary.json
    """

    utilization = summary.get('utilization', {})
    col1, col2, col3, col4 = st.columns(4)

    with col1:
        render_metric_card(
            label="Cycles",
            value=f"{utilization.get('cycles', 0):,}",
            help_text="Total cycles of one inference"
        )

    with col2:
        render_metric_card(
            label="Spatial utilization",
            value=f"{utilization.get('spatial_mean', 0) * 100:.1f}%",
            delta=f"σ {utilization.get('spatial_std', 0) * 100:.1f}%",
            delta_color="off",
            help_text="Mean over layers of mapped cells / allocated cells"
        )

    with col3:
        render_metric_card(
            label="Temporal utilization",
            value=f"{utilization.get('temporal_mean', 0) * 100:.1f}%",
            help_text="Mean over cycles of activated cells / array cells"
        )

    with col4:
        oracle = summary.get('oracle', '-')
        render_metric_card(
            label="Oracle",
            value=oracle,
            help_text="Functional outputs against the integer reference"
        )


def render_metric_card(label, value, delta=None, delta_color="normal", help_text=None):
    st.metric(label=label, value=value, delta=delta, delta_color=delta_color, help=help_text)


def render_cost_breakdown(summary):
    """Energy and area by component as two small tables"""

    col1, col2 = st.columns(2)
    with col1:
        st.markdown("#### Energy (pJ)")
        st.dataframe(
            {'component': list(summary.get('energy_pj', {})), 'pJ': list(summary.get('energy_pj', {}).values())},
            use_container_width=True, hide_index=True,
        )
    with col2:
        st.markdown("#### Area (mm²)")
        st.dataframe(
            {'component': list(summary.get('area_mm2', {})), 'mm2': list(summary.get('area_mm2', {}).values())},
            use_container_width=True, hide_index=True,
        )
    shares = summary.get('shares', {})
    if shares:
        st.caption(
            f"OR: {shares.get('or_energy_share', 0) * 100:.1f}% of energy, "
            f"{shares.get('or_area_share', 0) * 100:.1f}% of area · "
            f"controller: {shares.get('controller_energy_share', 0) * 100:.1f}% of energy"
        )
