"""
Sidebar Component - Navigation and report directory
"""

import streamlit as st

import config
from data.data_loader import available_reports

PAGES = ["Overview", "Schedule", "Trade-offs"]


def render_sidebar():
    """
    Render the sidebar with navigation and the output directory picker

    Returns:
        tuple: (page_selection, out_dir)
    """

    with st.sidebar:
        st.markdown(f"# {config.APP_ICON} {config.APP_TITLE}")
        st.markdown(f"*Version {config.APP_VERSION}*")
        st.markdown("---")

        st.markdown("### 📑 Navigation")
        page_selection = st.radio("Select Page", options=PAGES, label_visibility="collapsed",
                                  key="page_navigation")
        st.markdown("---")

        st.markdown("### 📂 Reports")
        out_dir = st.text_input("Output directory", value=config.DEFAULT_OUTPUT_DIR)
        found = available_reports(out_dir)
        if found:
            st.caption("Found: " + ", ".join(found))
        else:
            st.warning("No report files here. Run `python cli.py simulate --model ... --out DIR` first.")
        st.markdown("---")
        render_footer()

    return page_selection, out_dir


def render_footer():
    st.markdown("### ℹ️ About")
    st.markdown(
        "Views the CSV and JSON files written by the command-line simulator. "
        "Nothing is recomputed here."
    )
