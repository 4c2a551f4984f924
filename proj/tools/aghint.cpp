#include "aghint/cli.hpp"

int main(int argc, char** argv) { return aghint::cli::dispatch(argc, argv); }
