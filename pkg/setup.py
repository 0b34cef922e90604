# -*- coding: utf-8 -*-

import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="gotkit",
    version="0.1.0",
    author="gotkit contributors",
    description="Goal-oriented sampling of controlled Markov sources: GoT costs, optimal policies and experiments",
    long_description=long_description,
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "PyYAML>=6.0",
        "click>=8.0",
    ],
    extras_require={
        "tests": ["pytest>=7.0"],
        "docs": ["mkdocs-material"],
    },
    packages=setuptools.find_packages(exclude=("tests", "tests.*")),
    package_data={"gotkit": ["configs/*.yaml"]},
    classifiers=(
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ),
    entry_points={
        'console_scripts': [
            'gotkit = gotkit.__main__:cli'
        ]
    }
)
