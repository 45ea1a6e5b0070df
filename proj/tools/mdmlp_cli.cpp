#include "mdmlp/dataio.hpp"

int main(int argc, char** argv) { return mdmlp::run_cli(argc, argv); }
