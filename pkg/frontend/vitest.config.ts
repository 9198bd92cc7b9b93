import { defineConfig } from "vitest/config";

// Unit tests only; the live-service suite runs via the integration config.
export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    exclude: ["tests/server_roundtrip.test.ts", "**/node_modules/**"],
    environment: "node",
  },
});
