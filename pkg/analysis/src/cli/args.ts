import { parseArgs } from "node:util";

/** Shared flag parsing for the per-figure entry scripts. */
export function figureArgs(
  argv: string[],
  flags: Record<string, { required?: boolean }>,
): Record<string, string> {
  const options: Record<string, { type: "string" }> = {};
  for (const name of Object.keys(flags)) {
    options[name] = { type: "string" };
  }
  options.out = { type: "string" };
  const { values } = parseArgs({ args: argv, options, strict: true });
  for (const [name, conf] of Object.entries(flags)) {
    if (conf.required && !values[name]) {
      throw new Error(`missing required flag --${name}`);
    }
  }
  if (!values.out) {
    throw new Error("missing required flag --out");
  }
  return Object.fromEntries(
    Object.entries(values).filter(([, v]) => v !== undefined),
  ) as Record<string, string>;
}

export function runMain(fn: () => void): void {
  try {
    fn();
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    process.exitCode = 1;
  }
}
