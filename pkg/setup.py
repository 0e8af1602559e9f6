from setuptools import setup, find_packages

setup(
    name="rast",
    version="0.1.0",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=[
        "numpy>=1.26",
        "pydantic>=2.5",
        "scikit-learn>=1.3",
        "pandas>=2.1",
        "langgraph>=0.4.0",
        "streamlit>=1.45.0",
    ],
    entry_points={
        "console_scripts": ["rast=src.cli:main"],
    },
    python_requires=">=3.11",
)
