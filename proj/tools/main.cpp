#include "mpqmc/experiment.hpp"

int main(int argc, char** argv) { return mpqmc::cli_main(argc, argv); }
