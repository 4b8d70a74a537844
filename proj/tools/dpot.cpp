#include "dpot/cli.hpp"

int main(int argc, char** argv) { return dpot::cli::dispatch(argc, argv); }
