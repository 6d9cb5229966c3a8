from setuptools import find_packages, setup

__version__ = "0.4.0"


setup(
    name="py9audit",
    version=__version__,
    packages=find_packages(exclude=["tests", "examples*"]),
    python_requires=">=3.10",
    install_requires=["numpy>=1.22", "scipy>=1.8", "PyYAML>=6.0"],
    extras_require={"test": ["pytest>=7"]},
    scripts=["py9audit/run_py9a.py"],
)
