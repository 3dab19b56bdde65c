from setuptools import setup, find_packages

setup(
    name='histonav',
    version='1.0.0',
    packages=find_packages(include=['histonav', 'histonav.*']),
    package_data={'histonav.examples': ['presets/*.json', 'reference/*.txt']},
    entry_points={'console_scripts': ['histonav=histonav.cli:main']},
)
