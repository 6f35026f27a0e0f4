#include "ddml/cli.hpp"

int main(int argc, char** argv) { return ddml::run_cli(argc, argv); }
